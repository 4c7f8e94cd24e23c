#pragma once

#include <stdexcept>
#include <string>

namespace lrknn {

// Base for every error raised by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shaping parameters that are non-finite or outside their domain.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Any other precondition violation on an argument (counts, ranges, alpha).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Quadrature did not reach the requested tolerance.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double achieved_tolerance)
      : Error(what), achieved_tolerance_(achieved_tolerance) {}

  double achieved_tolerance() const noexcept { return achieved_tolerance_; }

 private:
  double achieved_tolerance_;
};

// kNN radius collapsed to zero (repeated values) or k too large for the set.
class DegenerateSample : public Error {
 public:
  DegenerateSample(const std::string& what, double value)
      : Error(what), value_(value) {}

  double value() const noexcept { return value_; }

 private:
  double value_;
};

// No observed sample falls inside the synthetic support.
class EmptyOverlap : public Error {
 public:
  using Error::Error;
};

// Every probed candidate had an empty overlap.
class FitFailure : public Error {
 public:
  using Error::Error;
};

// Too many failed trials in a Monte Carlo campaign.
class CampaignError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrknn

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lrknn {

// Shaping parameters of the Lognormal-Rician intensity law: the Rician
// coherence parameter r and the variance sigma_z2 of ln z.
struct ShapingParams {
  double r = 0.0;
  double sigma_z2 = 0.0;

  // Throws InvalidParameter unless r >= 0, sigma_z2 > 0 and both are finite.
  void validate() const;

  friend bool operator==(const ShapingParams&, const ShapingParams&) = default;
};

// Positive, finite intensity samples with a record of where they came from.
class SampleSet {
 public:
  // Throws InvalidArgument on an empty set or a non-positive/non-finite value.
  explicit SampleSet(std::vector<double> values,
                     std::optional<std::uint64_t> seed = std::nullopt,
                     std::optional<ShapingParams> origin = std::nullopt);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  const std::optional<std::uint64_t>& seed() const noexcept { return seed_; }
  const std::optional<ShapingParams>& origin() const noexcept { return origin_; }

  bool is_sorted() const noexcept;
  // Copy with values in ascending order; provenance is kept.
  SampleSet sorted() const;

 private:
  std::vector<double> values_;
  std::optional<std::uint64_t> seed_;
  std::optional<ShapingParams> origin_;
};

struct QuadratureConfig {
  double rel_tol = 1e-10;
  // Half-width of the ln z integration window, in units of sigma_z.
  double z_range_sigmas = 8.0;
  // Upper bound on the number of adaptive subintervals.
  int max_subdivisions = 4096;

  void validate() const;
};

// Draws n intensities I = z * y: ln z ~ N(-sigma_z2/2, sigma_z2) and y the
// unit-mean Rician intensity |mu + g|^2 with mu^2 = r/(1+r) and g circular
// complex Gaussian of total variance 1/(1+r). Deterministic in seed.
SampleSet sample(const ShapingParams& params, std::size_t n, std::uint64_t seed);

// Allocation-free variant used by the likelihood hot loop. Produces the same
// stream as sample() for the same seed.
void sample_into(const ShapingParams& params, std::uint64_t seed, std::span<double> out);

// E[I^2] = exp(sigma_z2) * (r^2 + 4r + 2) / (1 + r)^2.
double second_moment(const ShapingParams& params);

// Lognormal-Rician density at `intensity`, by adaptive Gauss-Kronrod
// quadrature over u = ln z with the Bessel factor in exponentially scaled form.
// Throws NumericError if the tolerance is not reached.
double pdf_reference(const ShapingParams& params, double intensity,
                     const QuadratureConfig& cfg = {});

// P(I <= lambda). Integrates the conditional Rician CDF (a noncentral
// chi-square with two degrees of freedom) against the lognormal weight, so it
// does not share a code path with pdf_reference.
double cdf_reference(const ShapingParams& params, double lambda,
                     const QuadratureConfig& cfg = {});

// cdf_reference tabulated on a logarithmic grid and linearly interpolated in
// ln(lambda). Used where millions of CDF lookups are needed (KS batches).
class ReferenceCdfTable {
 public:
  explicit ReferenceCdfTable(const ShapingParams& params, std::size_t nodes = 4000,
                             const QuadratureConfig& cfg = {});

  double operator()(double lambda) const noexcept;
  const ShapingParams& params() const noexcept { return params_; }

 private:
  ShapingParams params_;
  double log_lo_ = 0.0;
  double log_hi_ = 0.0;
  double step_ = 0.0;
  std::vector<double> cdf_;
};

// Writes the `intensity` header and one value per row with 17 significant
// digits. A non-empty provenance string is emitted first as a `# ` line.
void write_samples_csv(std::ostream& out, const SampleSet& samples,
                       const std::string& provenance = {});

}  // namespace lrknn

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrknn/channel_model.hpp"

namespace lrknn {

// Volume of the unit ball in d dimensions, pi^(d/2) / Gamma(d/2 + 1).
double unit_ball_volume(int d);

// Distance from sorted[index] to its k-th nearest neighbour among the other
// points of a one-dimensional ascending array. O(k).
double knn_distance(std::span<const double> sorted, std::size_t index, int k);

// One-dimensional kNN density estimate on the sorted sample, renormalised so
// that its piecewise-linear interpolant integrates to one over the support.
// Immutable once built.
class DensityEstimate {
 public:
  // Ascending support points C[0..M-1].
  std::span<const double> support() const noexcept { return support_; }
  // Raw kNN densities p_k(C[n]) before renormalisation.
  std::span<const double> densities() const noexcept { return densities_; }
  // Renormalisation factor: 1 / trapezoid integral of the raw densities.
  double c() const noexcept { return c_; }
  int k() const noexcept { return k_; }
  std::size_t size() const noexcept { return support_.size(); }

  // Linear interpolation between the bracketing support points, scaled by c
  // when `normalized`. std::nullopt marks x outside [C[0], C[M-1]].
  std::optional<double> density_at(double x, bool normalized = true) const;

  // Integral of the normalised interpolant from C[0] to min(lambda, C[M-1]);
  // 0 below the support and 1 above it.
  double cdf_at(double lambda) const;

 private:
  friend DensityEstimate estimate_sorted(std::vector<double> sorted, int k);

  std::vector<double> support_;
  std::vector<double> densities_;
  // cumulative_[j]: normalised mass on [C[0], C[j]].
  std::vector<double> cumulative_;
  double c_ = 1.0;
  int k_ = 0;
};

// Builds the estimate from an ascending array, taking ownership of it.
// Throws DegenerateSample when k >= M or a kNN radius is zero (k+1 equal
// values), InvalidArgument when k < 1, M < 2 or a value is not finite.
DensityEstimate estimate_sorted(std::vector<double> sorted, int k);

// Sorts a copy of the samples and builds the estimate.
DensityEstimate estimate(std::span<const double> samples, int k);
DensityEstimate estimate(const SampleSet& samples, int k);

// Rows of `support,raw_density,normalized_density`.
void write_density_csv(std::ostream& out, const DensityEstimate& est,
                       const std::string& provenance = {});

}  // namespace lrknn

#include "lrknn/knn_density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/sort/spreadsort/spreadsort.hpp>

#include "lrknn/error.hpp"

namespace lrknn {

double unit_ball_volume(int d) {
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  // V_d = V_{d-2} 2 pi / d from V_1 = 2 and V_2 = pi; exact for d = 1.
  double v = d % 2 == 1 ? 2.0 : std::numbers::pi;
  for (int j = d % 2 == 1 ? 3 : 4; j <= d; j += 2) v *= 2.0 * std::numbers::pi / j;
  return v;
}

double knn_distance(std::span<const double> sorted, std::size_t index, int k) {
  const std::size_t m = sorted.size();
  if (index >= m) throw InvalidArgument("index out of range");
  if (k < 1 || static_cast<std::size_t>(k) > m - 1) {
    throw InvalidArgument("k must be in [1, M-1]");
  }
  const double x = sorted[index];
  std::size_t left = index;   // next candidate on the left is left - 1
  std::size_t right = index;  // next candidate on the right is right + 1
  double radius = 0.0;
  for (int taken = 0; taken < k; ++taken) {
    const bool has_left = left > 0;
    const bool has_right = right + 1 < m;
    const double dl = has_left ? x - sorted[left - 1] : 0.0;
    const double dr = has_right ? sorted[right + 1] - x : 0.0;
    if (has_left && (!has_right || dl <= dr)) {
      radius = dl;
      --left;
    } else {
      radius = dr;
      ++right;
    }
  }
  return radius;
}

DensityEstimate estimate_sorted(std::vector<double> sorted, int k) {
  const std::size_t m = sorted.size();
  if (m < 2) throw InvalidArgument("density estimate needs at least two samples");
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (static_cast<std::size_t>(k) > m - 1) {
    std::ostringstream msg;
    msg << "k = " << k << " needs at least " << k + 1 << " samples, got " << m;
    throw DegenerateSample(msg.str(), std::nan(""));
  }
  for (double v : sorted) {
    if (!std::isfinite(v)) throw InvalidArgument("samples must be finite");
  }

  DensityEstimate est;
  est.k_ = k;
  est.densities_.resize(m);
  const auto uk = static_cast<std::size_t>(k);
  const double scale = static_cast<double>(k) / static_cast<double>(m - 1) / unit_ball_volume(1);

  // The k nearest neighbours of C[n] together with C[n] form a window
  // C[s..s+k] with s in [n-k, n]. The best start is non-decreasing in n, so
  // one forward pointer finds every radius in O(M) total.
  std::size_t start = 0;
  for (std::size_t n = 0; n < m; ++n) {
    const double x = sorted[n];
    const std::size_t lo = n >= uk ? n - uk : 0;
    const std::size_t hi = std::min(n, m - 1 - uk);
    start = std::clamp(start, lo, hi);
    auto width = [&](std::size_t s) { return std::max(x - sorted[s], sorted[s + uk] - x); };
    double best = width(start);
    while (start < hi) {
      const double next = width(start + 1);
      if (next > best) break;
      best = next;
      ++start;
    }
    if (!(best > 0.0)) {
      std::ostringstream msg;
      msg << "kNN radius is zero at value " << x << " (at least " << k
          << " other samples share it); jitter the data or raise k";
      throw DegenerateSample(msg.str(), x);
    }
    est.densities_[n] = scale / best;
  }

  est.cumulative_.resize(m);
  est.cumulative_[0] = 0.0;
  for (std::size_t j = 1; j < m; ++j) {
    const double h = sorted[j] - sorted[j - 1];
    est.cumulative_[j] =
        est.cumulative_[j - 1] + 0.5 * h * (est.densities_[j - 1] + est.densities_[j]);
  }
  const double raw_mass = est.cumulative_.back();
  est.c_ = 1.0 / raw_mass;
  for (double& v : est.cumulative_) v *= est.c_;
  est.support_ = std::move(sorted);
  return est;
}

DensityEstimate estimate(std::span<const double> samples, int k) {
  std::vector<double> sorted(samples.begin(), samples.end());
  boost::sort::spreadsort::spreadsort(sorted.begin(), sorted.end());
  return estimate_sorted(std::move(sorted), k);
}

DensityEstimate estimate(const SampleSet& samples, int k) { return estimate(samples.values(), k); }

std::optional<double> DensityEstimate::density_at(double x, bool normalized) const {
  if (!(x >= support_.front() && x <= support_.back())) return std::nullopt;
  const double scale = normalized ? c_ : 1.0;
  auto it = std::upper_bound(support_.begin(), support_.end(), x);
  if (it == support_.end()) return scale * densities_.back();
  const auto j = static_cast<std::size_t>(it - support_.begin()) - 1;
  const double h = support_[j + 1] - support_[j];
  const double t = (x - support_[j]) / h;
  return scale * (densities_[j] + t * (densities_[j + 1] - densities_[j]));
}

double DensityEstimate::cdf_at(double lambda) const {
  if (std::isnan(lambda) || lambda <= support_.front()) return 0.0;
  if (lambda >= support_.back()) return 1.0;
  auto it = std::upper_bound(support_.begin(), support_.end(), lambda);
  const auto j = static_cast<std::size_t>(it - support_.begin()) - 1;
  const double h = support_[j + 1] - support_[j];
  const double t = (lambda - support_[j]) / h;
  const double p0 = densities_[j];
  const double pt = p0 + t * (densities_[j + 1] - p0);
  const double partial = c_ * 0.5 * t * h * (p0 + pt);
  return std::min(cumulative_[j] + partial, 1.0);
}

void write_density_csv(std::ostream& out, const DensityEstimate& est,
                       const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "support,raw_density,normalized_density\n";
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < est.size(); ++i) {
    out << est.support()[i] << ',' << est.densities()[i] << ',' << est.c() * est.densities()[i]
        << '\n';
  }
  out.precision(old_precision);
}

}  // namespace lrknn

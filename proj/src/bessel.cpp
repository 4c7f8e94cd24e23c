#include "lrknn/bessel.hpp"

#include <cmath>
#include <numbers>

namespace lrknn {

namespace {

// Below this the ascending series is summed and scaled; above it the
// asymptotic expansion is accurate to full double precision.
constexpr double kSeriesLimit = 30.0;

double i0_series(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// exp(-x) I0(x) ~ 1/sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
double i0e_asymptotic(double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * odd * odd / (8.0 * k * x);
    if (next >= term) break;
    term = next;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

}  // namespace

double bessel_i0e(double x) {
  const double ax = std::fabs(x);
  if (ax < kSeriesLimit) return i0_series(ax) * std::exp(-ax);
  return i0e_asymptotic(ax);
}

}  // namespace lrknn

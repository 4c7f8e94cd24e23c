#pragma once

namespace lrknn {

// Exponentially scaled modified Bessel function of the first kind, order 0:
// exp(-|x|) * I0(x). Finite for every finite x.
double bessel_i0e(double x);

}  // namespace lrknn

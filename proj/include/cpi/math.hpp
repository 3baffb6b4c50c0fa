#pragma once

#include <cmath>
#include <limits>

namespace cpi {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal density.
inline double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Standard normal CDF via erfc (accurate in both tails).
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

/// Inverse standard normal CDF (Wichura's PPND16 rational approximation,
/// relative error below 1e-15 on (0,1)).
double normal_quantile(double p);

} // namespace cpi

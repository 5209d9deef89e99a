#include "ntkal/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace ntkal::bounds {

double l_term(long t, double delta) {
    if (t < 1) throw std::invalid_argument("l_term: t must be >= 1");
    if (delta <= 0.0 || delta >= 1.0 + 1e-15)
        throw std::invalid_argument("l_term: delta must be in (0,1]");
    return std::log(5.2 * std::pow(std::log(2.0 * static_cast<double>(t)), 1.4) / delta);
}

namespace {

// 1.4 * loglog(2 (W/m v 1)) + log(5.2/delta).  The (W/m v 1) clamp makes the
// inner argument >= 2, whose loglog is negative (~ -0.367); the formula's
// constants absorb it, so the value is passed through unmodified.
double stitch_term(const BoundaryQuery& q) {
    if (q.floor_m <= 0.0) throw std::invalid_argument("boundary: floor_m must be > 0");
    if (q.delta <= 0.0 || q.delta >= 1.0) throw std::invalid_argument("boundary: delta in (0,1)");
    if (q.variance_process < 0.0) throw std::invalid_argument("boundary: W must be >= 0");
    const double ratio = std::max(q.variance_process / q.floor_m, 1.0);
    return 1.4 * std::log(std::log(2.0 * ratio)) + std::log(5.2 / q.delta);
}

}  // namespace

double hoeffding_boundary(const BoundaryQuery& q) {
    const double w = std::max(q.variance_process, q.floor_m);
    return 1.44 * std::sqrt(w * stitch_term(q));
}

double bernstein_boundary(const BoundaryQuery& q) {
    if (q.scale_c < 0.0) throw std::invalid_argument("boundary: scale_c must be >= 0");
    return hoeffding_boundary(q) + 0.41 * q.scale_c * stitch_term(q);
}

bool elliptical_check(const std::vector<std::pair<double, double>>& increments,
                      double logdet_ratio) {
    double lhs = 0.0;
    double b = 0.0;
    for (const auto& [bi, sq] : increments) {
        lhs += std::min(bi, sq);
        b = std::max(b, bi);
    }
    return lhs <= (1.0 + b) * logdet_ratio + 1e-12;
}

}  // namespace ntkal::bounds

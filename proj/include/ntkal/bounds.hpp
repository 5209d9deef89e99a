#ifndef NTKAL_BOUNDS_HPP
#define NTKAL_BOUNDS_HPP

#include <utility>
#include <vector>

namespace ntkal::bounds {

// Stitched log-log confidence term L(t, delta) = log(5.2 * log(2t)^1.4 / delta).
// Can be negative for t = 1 and large delta; callers use it inside additive
// thresholds where a negative value only tightens the test.
double l_term(long t, double delta);

struct BoundaryQuery {
    double variance_process = 0.0;  // W_t >= 0
    double floor_m = 1.0;           // m > 0
    double scale_c = 0.0;           // c >= 0 (Bernstein only)
    double delta = 0.05;
};

// Time-uniform Hoeffding boundary:
//   1.44 * sqrt((W v m) * (1.4 loglog(2 (W/m v 1)) + log(5.2/delta)))
double hoeffding_boundary(const BoundaryQuery& q);

// Hoeffding boundary plus 0.41 * c * (1.4 loglog(2 (W/m v 1)) + log(5.2/delta)).
double bernstein_boundary(const BoundaryQuery& q);

// Elliptical-potential check: sum of b ^ squared_norm <= (1+b) * logdet_ratio.
// `increments` holds (b, squared_norm) pairs; the same b must be used for the
// whole trace when checking the lemma, but mixed values are accepted.
bool elliptical_check(const std::vector<std::pair<double, double>>& increments,
                      double logdet_ratio);

}  // namespace ntkal::bounds

#endif

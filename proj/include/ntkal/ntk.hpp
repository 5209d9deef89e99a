#ifndef NTKAL_NTK_HPP
#define NTKAL_NTK_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ntkal::ntk {

// Ordered set of unit-norm points in R^dim, one per row.
struct PointSet {
    Eigen::MatrixXd points;  // k x dim
    int dim = 0;

    int size() const { return static_cast<int>(points.rows()); }
    void validate(double tol = 1e-9) const;  // throws on non-unit rows
};

struct NtkReport {
    Eigen::MatrixXd H;   // k x k, symmetric PSD
    double lambda0 = 0;  // smallest eigenvalue of H
    double L_H = 0;      // log det(I + H)
    int depth = 0;
};

struct ComplexityReport {
    Eigen::VectorXd h_vector;
    double S = 0;  // sqrt(h' H^-1 h)
};

// Depth-n infinite-width ReLU NTK over the point set, via the covariance
// recursion with closed-form arc-cosine expectations.  Correlations are
// clamped to [-1, 1] before acos (guards numerical overshoot only).
NtkReport ntk_matrix(const PointSet& points, int depth);

// S = sqrt(h' H^-1 h) via Cholesky solve.  Throws if H is not numerically
// positive definite (the recursion's eigenvalue assumption is violated).
ComplexityReport complexity_S(const Eigen::VectorXd& h_vector, const NtkReport& report);

// Diagnostic (L_H + 1)(L_H + 17/16 + 2 log(M/delta) + S^2); seeds the d_i grid.
double d_diagnostic(double S, double delta, const NtkReport& report, long M);

// Monte-Carlo re-estimate of the recursion: every Gaussian expectation is
// replaced by a sample mean over `samples` draws, propagated through the
// levels.  `se` holds a conservative per-entry standard error for the final H.
struct McNtkEstimate {
    Eigen::MatrixXd H;
    Eigen::MatrixXd se;
};
McNtkEstimate mc_ntk_matrix(const PointSet& points, int depth, long samples,
                            std::uint64_t seed);

// CSV interchange: one row per point; when `h_out` is non-null an optional
// trailing column is parsed into it (rows without it are an error if any row
// has one).
PointSet read_point_csv(const std::string& path, Eigen::VectorXd* h_out = nullptr);
void write_point_csv(const std::string& path, const PointSet& points,
                     const Eigen::VectorXd* h = nullptr);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace ntkal::ntk

#endif

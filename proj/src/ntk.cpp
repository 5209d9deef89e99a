#include "ntkal/ntk.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ntkal::ntk {

namespace {

constexpr double kPi = std::numbers::pi;

// acos and sqrt(1 - rho^2) are well defined on the closed interval, so only
// numerical overshoot beyond +-1 needs clamping; shaving an interior margin
// would visibly bias the diagonal (the recursion hits rho = 1 exactly there).
double clamp_rho(double rho) {
    return std::clamp(rho, -1.0, 1.0);
}

// 2 E[sigma(u) sigma(v)] for (u,v) centered Gaussian with marginal stds
// su, sv and correlation rho (first-order arc-cosine kernel).
double relu_expectation(double su, double sv, double rho) {
    rho = clamp_rho(rho);
    return su * sv / kPi * (std::sqrt(1.0 - rho * rho) + rho * (kPi - std::acos(rho)));
}

// 2 E[1{u>=0} 1{v>=0}] (zeroth-order arc-cosine kernel).
double step_expectation(double rho) {
    return 1.0 - std::acos(clamp_rho(rho)) / kPi;
}

double logdet_i_plus(const Eigen::MatrixXd& H) {
    Eigen::MatrixXd A = H;
    A.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("ntk: I + H is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

void PointSet::validate(double tol) const {
    if (points.cols() != dim)
        throw std::invalid_argument("PointSet: dim does not match point width");
    for (int i = 0; i < size(); ++i) {
        const double n = points.row(i).norm();
        if (std::abs(n - 1.0) > tol)
            throw std::invalid_argument("PointSet: point " + std::to_string(i) +
                                        " has norm " + std::to_string(n));
    }
}

NtkReport ntk_matrix(const PointSet& points, int depth) {
    if (depth < 2) throw std::invalid_argument("ntk_matrix: depth must be >= 2");
    points.validate();
    const int k = points.size();
    if (k == 0) throw std::invalid_argument("ntk_matrix: empty point set");

    Eigen::MatrixXd sigma = points.points * points.points.transpose();
    Eigen::MatrixXd htil = sigma;

    for (int level = 1; level < depth; ++level) {
        Eigen::MatrixXd next_sigma(k, k), next_htil(k, k);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j <= i; ++j) {
                const double su = std::sqrt(sigma(i, i));
                const double sv = std::sqrt(sigma(j, j));
                const double rho = sigma(i, j) / (su * sv);
                const double s = relu_expectation(su, sv, rho);
                const double h = htil(i, j) * step_expectation(rho) + s;
                next_sigma(i, j) = next_sigma(j, i) = s;
                next_htil(i, j) = next_htil(j, i) = h;
            }
        }
        sigma = std::move(next_sigma);
        htil = std::move(next_htil);
    }

    NtkReport report;
    report.depth = depth;
    report.H = 0.5 * (htil + sigma);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(report.H,
                                                      Eigen::EigenvaluesOnly);
    report.lambda0 = es.eigenvalues().minCoeff();
    report.L_H = logdet_i_plus(report.H);
    return report;
}

ComplexityReport complexity_S(const Eigen::VectorXd& h_vector, const NtkReport& report) {
    if (h_vector.size() != report.H.rows())
        throw std::invalid_argument("complexity_S: h_vector length mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(report.H);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(
            "complexity_S: H is singular or indefinite (lambda0 assumption violated)");
    ComplexityReport out;
    out.h_vector = h_vector;
    out.S = std::sqrt(std::max(0.0, h_vector.dot(llt.solve(h_vector))));
    return out;
}

double d_diagnostic(double S, double delta, const NtkReport& report, long M) {
    if (S < 0.0) throw std::invalid_argument("d_diagnostic: S must be >= 0");
    if (delta <= 0.0 || delta >= 1.0)
        throw std::invalid_argument("d_diagnostic: delta must be in (0,1)");
    if (M < 1) throw std::invalid_argument("d_diagnostic: M must be >= 1");
    const double L = report.L_H;
    return (L + 1.0) *
           (L + 17.0 / 16.0 + 2.0 * std::log(static_cast<double>(M) / delta) + S * S);
}

McNtkEstimate mc_ntk_matrix(const PointSet& points, int depth, long samples,
                            std::uint64_t seed) {
    if (depth < 2) throw std::invalid_argument("mc_ntk_matrix: depth must be >= 2");
    if (samples < 2) throw std::invalid_argument("mc_ntk_matrix: need >= 2 samples");
    points.validate();
    const int k = points.size();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;

    Eigen::MatrixXd sigma = points.points * points.points.transpose();
    Eigen::MatrixXd htil = sigma;
    // Per-entry standard deviation of the running estimates.  Errors at one
    // level feed the next through maps with derivatives bounded by ~1 on
    // unit-diagonal inputs, and the different error sources (carried errors,
    // and the two sample means drawn from the same Gaussians) are positively
    // correlated, so standard deviations are combined additively rather than
    // in quadrature.  The result is a conservative bound.
    Eigen::MatrixXd sd_sigma = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd sd_htil = Eigen::MatrixXd::Zero(k, k);

    for (int level = 1; level < depth; ++level) {
        Eigen::MatrixXd next_sigma(k, k), next_htil(k, k);
        Eigen::MatrixXd next_ss(k, k), next_sh(k, k);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j <= i; ++j) {
                const double su = std::sqrt(std::max(sigma(i, i), 0.0));
                const double sv = std::sqrt(std::max(sigma(j, j), 0.0));
                const double rho = clamp_rho(sigma(i, j) / std::max(su * sv, 1e-300));
                const double cross = std::sqrt(1.0 - rho * rho);

                double sum_s = 0, sumsq_s = 0, sum_q = 0, sumsq_q = 0;
                for (long n = 0; n < samples; ++n) {
                    const double z1 = gauss(rng);
                    const double z2 = gauss(rng);
                    const double u = su * z1;
                    const double v = sv * (rho * z1 + cross * z2);
                    const double s = 2.0 * std::max(u, 0.0) * std::max(v, 0.0);
                    const double q = (u >= 0.0 && v >= 0.0) ? 2.0 : 0.0;
                    sum_s += s;
                    sumsq_s += s * s;
                    sum_q += q;
                    sumsq_q += q * q;
                }
                const double ns = static_cast<double>(samples);
                const double mean_s = sum_s / ns;
                const double mean_q = sum_q / ns;
                const double sd_mean_s = std::sqrt(
                    std::max(0.0, sumsq_s / ns - mean_s * mean_s) / ns);
                const double sd_mean_q = std::sqrt(
                    std::max(0.0, sumsq_q / ns - mean_q * mean_q) / ns);

                const double carried = sd_sigma(i, j) +
                                       0.5 * (sd_sigma(i, i) + sd_sigma(j, j));
                const double s_next = mean_s;
                const double h_next = htil(i, j) * mean_q + s_next;
                next_sigma(i, j) = next_sigma(j, i) = s_next;
                next_htil(i, j) = next_htil(j, i) = h_next;
                next_ss(i, j) = next_ss(j, i) = sd_mean_s + carried;
                next_sh(i, j) = next_sh(j, i) =
                    sd_htil(i, j) + std::abs(htil(i, j)) * sd_mean_q +
                    next_ss(i, j);
            }
        }
        sigma = std::move(next_sigma);
        htil = std::move(next_htil);
        sd_sigma = std::move(next_ss);
        sd_htil = std::move(next_sh);
    }

    McNtkEstimate est;
    est.H = 0.5 * (htil + sigma);
    est.se = 0.5 * (sd_htil + sd_sigma);
    return est;
}

PointSet read_point_csv(const std::string& path, Eigen::VectorXd* h_out) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged CSV in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty point CSV " + path);
    int cols = static_cast<int>(rows.front().size());
    int dim = (h_out != nullptr) ? cols - 1 : cols;
    if (dim < 1) throw std::runtime_error("point CSV has too few columns");
    PointSet ps;
    ps.dim = dim;
    ps.points.resize(static_cast<int>(rows.size()), dim);
    if (h_out) h_out->resize(static_cast<int>(rows.size()));
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        for (int j = 0; j < dim; ++j) ps.points(i, j) = rows[i][j];
        if (h_out) (*h_out)(i) = rows[i][dim];
    }
    return ps;
}

void write_point_csv(const std::string& path, const PointSet& points,
                     const Eigen::VectorXd* h) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    for (int i = 0; i < points.size(); ++i) {
        for (int j = 0; j < points.dim; ++j) {
            if (j) out << ',';
            out << points.points(i, j);
        }
        if (h) out << ',' << (*h)(i);
        out << '\n';
    }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << m(i, j);
        }
        out << '\n';
    }
}

}  // namespace ntkal::ntk

#include "ntkal/environment.hpp"

#include <cmath>
#include <stdexcept>

namespace ntkal::env {

namespace {

Eigen::VectorXd unit_gaussian(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = g(rng);
    const double n = x.norm();
    if (n < 1e-12) return unit_gaussian(d, rng);
    return x / n;
}

double draw_margin(const NoiseProfile& noise, std::mt19937_64& rng) {
    if (noise.hard()) return noise.hard_margin_eps;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (noise.alpha == 0.0) {
        // Atom at 0 plus a uniform tail; P(M < eps) = 1/2 + eps.
        if (unif(rng) < 0.5) return 0.0;
        return 0.5 * unif(rng);
    }
    return 0.5 * std::pow(unif(rng), 1.0 / noise.alpha);
}

}  // namespace

ExperimentLog::ExperimentLog(std::vector<double> eps)
    : eps_grid(std::move(eps)), t_eps(eps_grid.size(), 0) {}

void ExperimentLog::score(const StreamRecord& record, int action, bool queried) {
    ++rounds;
    if (action != record.bayes_action) regret += 2.0 * std::abs(record.margin);
    if (queried) ++queries;
    regret_curve.push_back(regret);
    query_curve.push_back(queries);
    for (size_t i = 0; i < eps_grid.size(); ++i)
        if (record.margin * record.margin <= eps_grid[i] * eps_grid[i]) ++t_eps[i];
}

Environment::Environment(EnvironmentModel model, NoiseProfile noise)
    : model_(std::move(model)), noise_(noise) {
    if (model_.dim < 1) throw std::invalid_argument("environment: dim must be >= 1");
    if (model_.theta_star.size() == 0) {
        model_.theta_star = Eigen::VectorXd::Zero(model_.dim);
        model_.theta_star(0) = 1.0;
    }
    if (model_.theta_star.size() != model_.dim)
        throw std::invalid_argument("environment: theta_star dimension mismatch");
    if (std::abs(model_.theta_star.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("environment: theta_star must be unit norm");
    if (model_.kind == Kind::margin_controlled && model_.dim != 2)
        throw std::invalid_argument("environment: margin_controlled requires d = 2");
    if (model_.kind != Kind::ntk_rkhs) return;

    // Fixed pool of raw unit points; h on the paired embeddings is
    // h = 1/2 + lambda * s with s in the image of the NTK matrix,
    // antisymmetrized across each (plus, minus) pair so the two arms sum to 1.
    const int k = model_.rkhs_pool_size;
    if (k < 2) throw std::invalid_argument("environment: rkhs_pool_size >= 2");
    std::mt19937_64 rng(model_.rkhs_seed);
    pool_points_.resize(k, model_.dim);
    for (int j = 0; j < k; ++j)
        pool_points_.row(j) = unit_gaussian(model_.dim, rng).transpose();

    ntk::PointSet aug;
    aug.dim = 2 * model_.dim;
    aug.points = Eigen::MatrixXd::Zero(2 * k, 2 * model_.dim);
    for (int j = 0; j < k; ++j) {
        aug.points.row(2 * j).head(model_.dim) = pool_points_.row(j);
        aug.points.row(2 * j + 1).tail(model_.dim) = pool_points_.row(j);
    }
    const ntk::NtkReport report = ntk::ntk_matrix(aug, model_.rkhs_depth);

    std::normal_distribution<double> g;
    Eigen::VectorXd w(2 * k);
    for (int i = 0; i < 2 * k; ++i) w(i) = g(rng);
    Eigen::VectorXd s = report.H * w;
    for (int j = 0; j < k; ++j) {
        const double m = 0.5 * (s(2 * j) - s(2 * j + 1));
        s(2 * j) = m;
        s(2 * j + 1) = -m;
    }

    Eigen::LLT<Eigen::MatrixXd> llt(report.H);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("environment: rkhs pool NTK not positive definite");
    const Eigen::VectorXd half = Eigen::VectorXd::Constant(2 * k, 0.5);
    const Eigen::VectorXd u0 = llt.solve(half);
    const Eigen::VectorXd us = llt.solve(s);
    const double a = half.dot(u0);
    const double b = half.dot(us);
    const double c = s.dot(us);
    // S(lambda)^2 = a + 2 b lambda + c lambda^2; pick the lambda >= 0 hitting
    // the target, if one exists.
    const double target_sq = model_.rkhs_target_S * model_.rkhs_target_S;
    const double disc = b * b - c * (a - target_sq);
    double lambda = (disc >= 0.0 && c > 0.0) ? (-b + std::sqrt(disc)) / c : -1.0;
    if (lambda < 0.0) {
        const double min_sq = (b >= 0.0 || c <= 0.0) ? a : a - b * b / c;
        throw std::runtime_error(
            "environment: rkhs target S unreachable; minimum achievable S is " +
            std::to_string(std::sqrt(std::max(0.0, min_sq))));
    }
    // Squash h into [0.05, 0.95] by shrinking lambda if needed, then report
    // the S actually achieved.
    const double maxdev = (lambda * s).cwiseAbs().maxCoeff();
    if (maxdev > 0.45) lambda *= 0.45 / maxdev;
    achieved_S_ = std::sqrt(std::max(0.0, a + 2.0 * b * lambda + c * lambda * lambda));
    pool_h_plus_.resize(k);
    for (int j = 0; j < k; ++j) pool_h_plus_(j) = 0.5 + lambda * s(2 * j);
}

StreamRecord Environment::draw(std::mt19937_64& rng) const {
    StreamRecord r;
    switch (model_.kind) {
        case Kind::linear: {
            r.x = unit_gaussian(model_.dim, rng);
            r.h_plus = 0.5 * (1.0 + model_.theta_star.dot(r.x));
            r.margin = r.h_plus - 0.5;
            break;
        }
        case Kind::margin_controlled: {
            const double m = draw_margin(noise_, rng);
            std::uniform_int_distribution<int> coin(0, 1);
            const double sgn = coin(rng) ? 1.0 : -1.0;
            // x = (cos phi, sin phi) in the (theta*, perp) frame with phi the
            // angle in [0, pi] satisfying <theta*, x> = 2 m sgn.
            const double cosv = 2.0 * m * sgn;
            const double sinv = std::sqrt(std::max(0.0, 1.0 - cosv * cosv));
            Eigen::Vector2d perp(-model_.theta_star(1), model_.theta_star(0));
            r.x = cosv * model_.theta_star + sinv * perp;
            // Keep the drawn margin exact; 0.5 + m*s - 0.5 would round and
            // break strict CDF comparisons right at the hard-margin atom.
            r.margin = m * sgn;
            r.h_plus = 0.5 + r.margin;
            break;
        }
        case Kind::ntk_rkhs: {
            std::uniform_int_distribution<int> pick(0, model_.rkhs_pool_size - 1);
            const int j = pick(rng);
            r.x = pool_points_.row(j).transpose();
            r.h_plus = pool_h_plus_(j);
            r.margin = r.h_plus - 0.5;
            break;
        }
    }
    r.bayes_action = (r.margin >= 0.0) ? +1 : -1;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    r.y = (unif(rng) < r.h_plus) ? +1 : -1;
    return r;
}

std::vector<StreamRecord> generate(const EnvironmentModel& model,
                                   const NoiseProfile& noise, long T,
                                   std::uint64_t seed) {
    Environment env(model, noise);
    std::mt19937_64 rng(seed);
    std::vector<StreamRecord> out;
    out.reserve(static_cast<size_t>(T));
    for (long t = 0; t < T; ++t) out.push_back(env.draw(rng));
    return out;
}

double online_to_batch(const std::function<int(const Eigen::VectorXd&)>& classify,
                       const std::vector<StreamRecord>& holdout) {
    if (holdout.empty()) throw std::invalid_argument("online_to_batch: empty holdout");
    double total = 0.0;
    for (const auto& r : holdout) {
        const int a = classify(r.x);
        const double h_a = (a > 0) ? r.h_plus : 1.0 - r.h_plus;
        total += std::max(r.h_plus, 1.0 - r.h_plus) - h_a;
    }
    return total / static_cast<double>(holdout.size());
}

NoiseCheckReport verify_noise(const std::vector<StreamRecord>& records,
                              const NoiseProfile& noise,
                              const std::vector<double>& eps_grid) {
    if (records.empty()) throw std::invalid_argument("verify_noise: empty stream");
    NoiseCheckReport report;
    const double n = static_cast<double>(records.size());
    for (double eps : eps_grid) {
        NoiseCheckRow row;
        row.eps = eps;
        long hits = 0;
        for (const auto& r : records)
            if (std::abs(r.margin) < eps) ++hits;
        row.empirical = static_cast<double>(hits) / n;
        if (noise.hard()) {
            row.expected = (eps > noise.hard_margin_eps) ? 1.0 : 0.0;
        } else if (noise.alpha == 0.0) {
            row.expected = (eps <= 0.0) ? 0.0 : std::min(1.0, 0.5 + eps);
        } else {
            row.expected = std::min(1.0, std::pow(2.0 * eps, noise.alpha));
        }
        row.stderr_ = std::sqrt(row.expected * (1.0 - row.expected) / n);
        row.ok = std::abs(row.empirical - row.expected) <= 3.0 * row.stderr_ + 1e-12;
        report.all_ok = report.all_ok && row.ok;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace ntkal::env

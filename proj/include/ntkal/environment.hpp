#ifndef NTKAL_ENVIRONMENT_HPP
#define NTKAL_ENVIRONMENT_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ntkal/ntk.hpp"

namespace ntkal::env {

// alpha = infinity() selects the hard-margin generator with margin exactly
// hard_margin_eps.  alpha = 0 uses a mixture placing mass 1/2 on margin 0 and
// the rest uniform on (0, 1/2), so margins concentrate at the boundary.
struct NoiseProfile {
    double alpha = 1.0;
    double hard_margin_eps = 0.1;

    bool hard() const { return std::isinf(alpha); }
};

enum class Kind { linear, margin_controlled, ntk_rkhs };

struct EnvironmentModel {
    Kind kind = Kind::linear;
    int dim = 2;
    Eigen::VectorXd theta_star;  // unit vector; defaults to e_1 when empty
    // ntk_rkhs knobs: fixed pool of unit points, h = 1/2 + lambda * s with
    // s an antisymmetrized NTK image, lambda solved to hit target_S.
    int rkhs_pool_size = 16;
    int rkhs_depth = 2;
    double rkhs_target_S = 2.0;
    std::uint64_t rkhs_seed = 1;  // fixes the pool independently of the stream
};

struct StreamRecord {
    Eigen::VectorXd x;     // unit context
    double h_plus = 0.5;   // h((x,0)); h((0,x)) = 1 - h_plus
    int y = +1;            // label in {-1,+1}, P(y=+1) = h_plus
    int bayes_action = +1; // sign(h_plus - 1/2), ties to +1
    double margin = 0.0;   // Delta = h_plus - 1/2
};

// Regret / label accounting for one trial.
struct ExperimentLog {
    std::vector<double> regret_curve;  // cumulative R_t
    std::vector<long> query_curve;     // cumulative N_t
    std::vector<double> eps_grid;      // for the T_eps table
    std::vector<long> t_eps;           // counts of Delta_t^2 <= eps^2
    double regret = 0.0;
    long queries = 0;
    long rounds = 0;

    explicit ExperimentLog(std::vector<double> eps = {});
    // Regret increment is 2|Delta| when the action differs from Bayes.
    void score(const StreamRecord& record, int action, bool queried);
};

// Stateful generator; construction precomputes the ntk_rkhs pool (and may
// throw if the target S is unreachable after squashing h into [0.05, 0.95]).
class Environment {
public:
    Environment(EnvironmentModel model, NoiseProfile noise);

    StreamRecord draw(std::mt19937_64& rng) const;

    const EnvironmentModel& model() const { return model_; }
    const NoiseProfile& noise() const { return noise_; }
    // ntk_rkhs only: achieved S after squashing, and the pool h values.
    double achieved_S() const { return achieved_S_; }
    const Eigen::MatrixXd& pool_points() const { return pool_points_; }
    const Eigen::VectorXd& pool_h_plus() const { return pool_h_plus_; }

private:
    EnvironmentModel model_;
    NoiseProfile noise_;
    Eigen::MatrixXd pool_points_;  // ntk_rkhs: k x d raw points
    Eigen::VectorXd pool_h_plus_;  // ntk_rkhs: h((x_j, 0)) per pool point
    double achieved_S_ = 0.0;
};

std::vector<StreamRecord> generate(const EnvironmentModel& model,
                                   const NoiseProfile& noise, long T,
                                   std::uint64_t seed);

// Excess risk of a fixed classifier on a holdout:
// mean of max(h, 1-h) - h(x, a_hat).
double online_to_batch(const std::function<int(const Eigen::VectorXd&)>& classify,
                       const std::vector<StreamRecord>& holdout);

struct NoiseCheckRow {
    double eps = 0.0;
    double empirical = 0.0;  // P(|Delta| < eps)
    double expected = 0.0;   // analytic CDF of the margin generator
    double stderr_ = 0.0;    // binomial standard error at the expected value
    bool ok = true;          // |empirical - expected| <= 3 stderr
};
struct NoiseCheckReport {
    std::vector<NoiseCheckRow> rows;
    bool all_ok = true;
};

// Compares the empirical margin CDF against the margin_controlled generator's
// analytic law: (2 eps)^alpha for finite alpha > 0, 1/2 + eps for alpha = 0,
// step at hard_margin_eps for alpha = infinity.
NoiseCheckReport verify_noise(const std::vector<StreamRecord>& records,
                              const NoiseProfile& noise,
                              const std::vector<double>& eps_grid);

}  // namespace ntkal::env

#endif

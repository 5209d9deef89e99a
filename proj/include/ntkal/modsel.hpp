#ifndef NTKAL_MODSEL_HPP
#define NTKAL_MODSEL_HPP

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ntkal/learner.hpp"

namespace ntkal::modsel {

struct LearnerSpec {
    double S = 1.0;
    double d = 1.0;
    learner::Learner base;
};

struct MetaConfig {
    double delta = 0.05;
    double gamma_exp = 0.0;       // exploration exponent gamma >= 0
    long horizon_T = 0;
    std::vector<double> epsilon_grid;  // for the label-complexity infimum
};

// Geometric grid {1/2, ..., down to (1/(3T))^(1/max(gamma,1))}, 32 points.
std::vector<double> default_epsilon_grid(long T, double gamma_exp);

// Cross product of the geometric grids S = 2^{i1}, i1 <= ceil(log2 T), and
// d = 2^{i2}, with i2 up to log2 T plus a loglog slack in the pool size.
// `factory` builds a fresh base learner for a given S.
std::vector<LearnerSpec> make_pool(
    long T, long M_bound_hint, double delta,
    const std::function<learner::Learner(double S)>& factory);

// Incremental statistics; explicit round sets are never stored.
struct PairStats {        // over V_{t,i,j}
    long count = 0;       // |V|
    double loss_diff = 0; // sum of 1{a_i != y} - 1{a_j != y}
    double sum_capB = 0;  // sum of 1 ^ B_i
};
struct LearnerStats {              // over T_{t,i} (rounds where i was chosen)
    long rounds = 0;               // |T_{t,i}|
    double sum_I = 0;              // labels requested while chosen
    double sum_IB2_quarter = 0;    // sum I B^2 ^ 1/4
    double sum_half_IB2 = 0;       // sum 1/2 ^ I B^2
};

struct Elimination {
    int who = -1;
    std::string test;  // "disagreement" | "observed_regret" | "label_complexity" | "d"
};

struct StepResult {
    int chosen = -1;
    int prediction = +1;
    bool queried = false;
    learner::Decision decision;  // the chosen learner's decision
    std::vector<Elimination> eliminations;
};

// The four elimination tests as pure functions over the accumulated
// statistics (and, for the disagreement test, this round's polls).  Each
// returns the indices to remove from `active`.
std::vector<int> disagreement_eliminations(
    const std::vector<int>& active, const std::vector<double>& S_values,
    const std::vector<learner::Decision>& polls);
std::vector<int> observed_regret_eliminations(
    const std::vector<int>& active,
    const std::vector<std::vector<PairStats>>& pair_stats, double delta);
std::vector<int> label_complexity_eliminations(
    const std::vector<int>& active, const std::vector<LearnerStats>& stats,
    const std::vector<double>& epsilon_grid, double gamma_exp, double delta,
    long pool_size, long t);
std::vector<int> d_eliminations(const std::vector<int>& active,
                                const std::vector<LearnerStats>& stats,
                                const std::vector<double>& d_values,
                                const std::vector<double>& d_constants);

// Regret-balancing meta-learner: samples a base learner with probability
// proportional to d_i^{-(gamma+1)} over the active set, forwards its decision,
// and prunes the pool with the four tests after every round.
class MetaLearner {
public:
    MetaLearner(MetaConfig config, std::vector<LearnerSpec> pool);

    // One meta round.  `label_oracle` is invoked at most once, only when the
    // chosen learner queries.  Labels are in {-1,+1}.
    StepResult step(const learner::AugmentedPoint& point,
                    const std::function<int()>& label_oracle,
                    std::mt19937_64& rng);

    const std::vector<int>& active() const { return active_; }
    const std::vector<double>& probs() const { return probs_; }  // aligned with active()
    long epoch() const { return epoch_; }
    const LearnerSpec& spec(int i) const { return pool_[i]; }
    const LearnerStats& stats(int i) const { return stats_[i]; }
    bool is_active(int i) const;

private:
    void recompute_probs();
    void remove(const std::vector<int>& victims, const char* test,
                std::vector<Elimination>* out);

    MetaConfig config_;
    std::vector<LearnerSpec> pool_;
    std::vector<int> active_;
    std::vector<double> probs_;
    std::vector<std::vector<PairStats>> pair_stats_;  // [i][j]
    std::vector<LearnerStats> stats_;
    long epoch_ = 0;
    long t_ = 0;
};

}  // namespace ntkal::modsel

#endif

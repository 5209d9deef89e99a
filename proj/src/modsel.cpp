#include "ntkal/modsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ntkal/bounds.hpp"

namespace ntkal::modsel {

std::vector<double> default_epsilon_grid(long T, double gamma_exp) {
    if (T < 2) throw std::invalid_argument("epsilon grid: T must be >= 2");
    const double lo =
        std::pow(1.0 / (3.0 * static_cast<double>(T)), 1.0 / std::max(gamma_exp, 1.0));
    const double hi = 0.5;
    if (lo >= hi) return {hi};
    const int points = 32;
    std::vector<double> grid(points);
    const double ratio = std::pow(lo / hi, 1.0 / (points - 1));
    double eps = hi;
    for (int j = 0; j < points; ++j, eps *= ratio) grid[j] = eps;
    return grid;
}

std::vector<LearnerSpec> make_pool(
    long T, long M_bound_hint, double delta,
    const std::function<learner::Learner(double S)>& factory) {
    if (T < 2) throw std::invalid_argument("make_pool: T must be >= 2");
    if (M_bound_hint < 1) throw std::invalid_argument("make_pool: M hint >= 1");
    const int i1_max = static_cast<int>(std::ceil(std::log2(static_cast<double>(T))));
    const double inner =
        std::max(4.0, static_cast<double>(M_bound_hint) *
                          std::log(static_cast<double>(T)) / delta);
    const int i2_max = static_cast<int>(std::ceil(
        std::log2(static_cast<double>(T)) + std::log2(std::max(2.0, std::log2(inner)))));
    std::vector<LearnerSpec> pool;
    for (int i1 = 0; i1 <= i1_max; ++i1) {
        const double S = std::ldexp(1.0, i1);
        for (int i2 = 0; i2 <= i2_max; ++i2)
            pool.push_back({S, std::ldexp(1.0, i2), factory(S)});
    }
    return pool;
}

std::vector<int> disagreement_eliminations(
    const std::vector<int>& active, const std::vector<double>& S_values,
    const std::vector<learner::Decision>& polls) {
    // Over the non-queriers N_t, every disagreeing pair kills all learners
    // with S <= min of the pair (strictly larger S survives).
    std::vector<int> nonquery;
    for (int i : active)
        if (!polls[i].query) nonquery.push_back(i);
    double kill_below = -1.0;
    for (size_t a = 0; a < nonquery.size(); ++a)
        for (size_t b = a + 1; b < nonquery.size(); ++b)
            if (polls[nonquery[a]].action != polls[nonquery[b]].action)
                kill_below = std::max(
                    kill_below,
                    std::min(S_values[nonquery[a]], S_values[nonquery[b]]));
    std::vector<int> out;
    if (kill_below < 0.0) return out;
    for (int i : active)
        if (S_values[i] <= kill_below) out.push_back(i);
    return out;
}

std::vector<int> observed_regret_eliminations(
    const std::vector<int>& active,
    const std::vector<std::vector<PairStats>>& pair_stats, double delta) {
    std::vector<int> out;
    for (int i : active) {
        bool gone = false;
        for (int j : active) {
            if (i == j) continue;
            const PairStats& ps = pair_stats[i][j];
            if (ps.count < 1) continue;
            const double slack =
                1.45 * std::sqrt(std::max(
                           0.0, static_cast<double>(ps.count) *
                                    bounds::l_term(ps.count, delta)));
            if (ps.loss_diff > ps.sum_capB + slack) {
                gone = true;
                break;
            }
        }
        if (gone) out.push_back(i);
    }
    return out;
}

std::vector<int> label_complexity_eliminations(
    const std::vector<int>& active, const std::vector<LearnerStats>& stats,
    const std::vector<double>& epsilon_grid, double gamma_exp, double delta,
    long pool_size, long t) {
    std::vector<int> out;
    for (int i : active) {
        const LearnerStats& st = stats[i];
        if (st.rounds < 1) continue;
        double inf_term = std::numeric_limits<double>::infinity();
        for (double eps : epsilon_grid)
            inf_term = std::min(
                inf_term, 3.0 * std::pow(eps, gamma_exp) * st.rounds +
                              st.sum_IB2_quarter / (eps * eps));
        const double delta_i =
            delta / (static_cast<double>(pool_size) *
                     std::log2(12.0 * static_cast<double>(t)));
        const double threshold = inf_term + 2.0 * bounds::l_term(st.rounds, delta_i);
        if (st.sum_I > threshold) out.push_back(i);
    }
    return out;
}

std::vector<int> d_eliminations(const std::vector<int>& active,
                                const std::vector<LearnerStats>& stats,
                                const std::vector<double>& d_values,
                                const std::vector<double>& d_constants) {
    std::vector<int> out;
    for (int i : active)
        if (stats[i].sum_half_IB2 > d_constants[i] * d_values[i]) out.push_back(i);
    return out;
}

MetaLearner::MetaLearner(MetaConfig config, std::vector<LearnerSpec> pool)
    : config_(std::move(config)), pool_(std::move(pool)) {
    if (pool_.empty()) throw std::invalid_argument("meta: empty pool");
    if (config_.gamma_exp < 0.0)
        throw std::invalid_argument("meta: gamma_exp must be >= 0");
    if (config_.epsilon_grid.empty())
        config_.epsilon_grid =
            default_epsilon_grid(std::max<long>(config_.horizon_T, 2),
                                 config_.gamma_exp);
    const int M = static_cast<int>(pool_.size());
    active_.resize(M);
    for (int i = 0; i < M; ++i) active_[i] = i;
    pair_stats_.assign(M, std::vector<PairStats>(M));
    stats_.assign(M, LearnerStats{});
    recompute_probs();
}

bool MetaLearner::is_active(int i) const {
    return std::find(active_.begin(), active_.end(), i) != active_.end();
}

void MetaLearner::recompute_probs() {
    probs_.resize(active_.size());
    double total = 0.0;
    for (size_t k = 0; k < active_.size(); ++k) {
        probs_[k] = std::pow(pool_[active_[k]].d, -(config_.gamma_exp + 1.0));
        total += probs_[k];
    }
    for (double& p : probs_) p /= total;
}

void MetaLearner::remove(const std::vector<int>& victims, const char* test,
                         std::vector<Elimination>* out) {
    for (int v : victims) {
        auto it = std::find(active_.begin(), active_.end(), v);
        if (it == active_.end()) continue;
        active_.erase(it);
        out->push_back({v, test});
    }
}

StepResult MetaLearner::step(const learner::AugmentedPoint& point,
                             const std::function<int()>& label_oracle,
                             std::mt19937_64& rng) {
    if (active_.empty()) throw std::runtime_error("meta: active set is empty");
    ++t_;

    std::vector<learner::Decision> polls(pool_.size());
    for (int i : active_) polls[i] = pool_[i].base.observe(point);

    std::discrete_distribution<int> pick(probs_.begin(), probs_.end());
    const int chosen = active_[pick(rng)];

    StepResult result;
    result.chosen = chosen;
    result.decision = polls[chosen];
    result.prediction = polls[chosen].action;
    result.queried = polls[chosen].query;

    LearnerStats& st = stats_[chosen];
    ++st.rounds;
    const double B = polls[chosen].B;
    if (polls[chosen].query) {
        st.sum_I += 1.0;
        st.sum_IB2_quarter += std::min(B * B, 0.25);
        st.sum_half_IB2 += std::min(0.5, B * B);

        const int y = label_oracle();
        if (y != 1 && y != -1) throw std::invalid_argument("meta: label must be +-1");
        const int loss = (polls[chosen].action != y) ? 1 : 0;
        pool_[chosen].base.update(point, polls[chosen], loss);

        // Accumulate V_{t, chosen, j} for non-querying, disagreeing peers.
        for (int j : active_) {
            if (j == chosen || polls[j].query ||
                polls[j].action == polls[chosen].action)
                continue;
            PairStats& ps = pair_stats_[chosen][j];
            ++ps.count;
            ps.loss_diff += loss - ((polls[j].action != y) ? 1 : 0);
            ps.sum_capB += std::min(1.0, B);
        }
    }

    std::vector<double> S_values(pool_.size()), d_values(pool_.size()),
        d_consts(pool_.size());
    for (size_t i = 0; i < pool_.size(); ++i) {
        S_values[i] = pool_[i].S;
        d_values[i] = pool_[i].d;
        d_consts[i] =
            (pool_[i].base.config().variant == nn::Variant::frozen) ? 8.0 : 432.0;
    }

    // Pseudocode order; each test sees the active set as pruned so far.
    remove(disagreement_eliminations(active_, S_values, polls), "disagreement",
           &result.eliminations);
    remove(observed_regret_eliminations(active_, pair_stats_, config_.delta),
           "observed_regret", &result.eliminations);
    remove(label_complexity_eliminations(active_, stats_, config_.epsilon_grid,
                                         config_.gamma_exp, config_.delta,
                                         static_cast<long>(pool_.size()), t_),
           "label_complexity", &result.eliminations);
    remove(d_eliminations(active_, stats_, d_values, d_consts), "d",
           &result.eliminations);

    if (!result.eliminations.empty()) {
        ++epoch_;
        if (active_.empty())
            throw std::runtime_error("meta: all learners eliminated");
        recompute_probs();
    }
    return result;
}

}  // namespace ntkal::modsel

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ntkal/bounds.hpp"
#include "ntkal/environment.hpp"
#include "ntkal/modsel.hpp"

using namespace ntkal;
using learner::AugmentedPoint;
using learner::Decision;
using learner::Learner;
using learner::LearnerConfig;
using namespace ntkal::modsel;

namespace {

Learner make_frozen(double S, std::uint64_t seed, int d = 2, int m = 8) {
    LearnerConfig lc;
    lc.S = S;
    lc.delta = 0.1;
    lc.variant = nn::Variant::frozen;
    return Learner(lc, nn::init_network(2 * d, m, 2, seed, nn::Variant::frozen));
}

Decision poll(int action, bool query, double B = 0.0) {
    Decision d;
    d.action = action;
    d.query = query;
    d.B = B;
    return d;
}

}  // namespace

TEST_CASE("epsilon grid is geometric and spans down to (1/3T)^(1/max(g,1))") {
    const auto grid = default_epsilon_grid(1000, 2.0);
    REQUIRE(grid.size() == 32);
    CHECK(grid.front() == doctest::Approx(0.5));
    CHECK(grid.back() ==
          doctest::Approx(std::pow(1.0 / 3000.0, 0.5)).epsilon(1e-9));
    for (size_t j = 1; j < grid.size(); ++j) {
        CHECK(grid[j] < grid[j - 1]);
        CHECK(grid[j] / grid[j - 1] ==
              doctest::Approx(grid[1] / grid[0]).epsilon(1e-9));
    }
}

TEST_CASE("make_pool grids") {
    const auto pool = make_pool(16, 8, 0.1, [](double S) { return make_frozen(S, 1); });
    std::vector<double> s_values;
    for (const auto& spec : pool)
        if (std::find(s_values.begin(), s_values.end(), spec.S) == s_values.end())
            s_values.push_back(spec.S);
    CHECK(s_values == std::vector<double>{1, 2, 4, 8, 16});
    for (size_t i = 1; i < s_values.size(); ++i)
        CHECK(s_values[i] / s_values[i - 1] == doctest::Approx(2.0));
    // d grid geometric as well, and every learner carries its S
    for (const auto& spec : pool) CHECK(spec.base.config().S == spec.S);
    double min_d = 1e300, max_d = 0;
    for (const auto& spec : pool) {
        min_d = std::min(min_d, spec.d);
        max_d = std::max(max_d, spec.d);
    }
    CHECK(min_d == doctest::Approx(1.0));
    CHECK(max_d >= 16.0);
}

TEST_CASE("sampling distribution over d") {
    MetaConfig mc;
    mc.delta = 0.1;
    mc.horizon_T = 100;

    SUBCASE("equal d gives the uniform distribution") {
        mc.gamma_exp = 3.0;
        std::vector<LearnerSpec> pool;
        pool.push_back({1.0, 1.0, make_frozen(1.0, 1)});
        pool.push_back({2.0, 1.0, make_frozen(2.0, 1)});
        MetaLearner meta(mc, std::move(pool));
        CHECK(meta.probs()[0] == doctest::Approx(0.5));
        CHECK(meta.probs()[1] == doctest::Approx(0.5));
    }
    SUBCASE("d = (1,2), gamma = 1 gives (4/5, 1/5)") {
        mc.gamma_exp = 1.0;
        std::vector<LearnerSpec> pool;
        pool.push_back({1.0, 1.0, make_frozen(1.0, 1)});
        pool.push_back({2.0, 2.0, make_frozen(2.0, 1)});
        MetaLearner meta(mc, std::move(pool));
        CHECK(meta.probs()[0] == doctest::Approx(0.8));
        CHECK(meta.probs()[1] == doctest::Approx(0.2));
    }
}

TEST_CASE("empirical draw frequencies match probs") {
    MetaConfig mc;
    mc.delta = 0.1;
    mc.gamma_exp = 1.0;
    mc.horizon_T = 100;
    std::vector<LearnerSpec> pool;
    pool.push_back({1.0, 1.0, make_frozen(1.0, 1)});
    pool.push_back({2.0, 2.0, make_frozen(2.0, 1)});
    pool.push_back({4.0, 4.0, make_frozen(4.0, 1)});
    MetaLearner meta(mc, std::move(pool));
    // probs proportional to (1, 1/4, 1/16) -> (16/21, 4/21, 1/21)
    std::mt19937_64 rng(5);
    std::discrete_distribution<int> pick(meta.probs().begin(), meta.probs().end());
    std::vector<long> counts(3, 0);
    const long n = 100000;
    for (long i = 0; i < n; ++i) ++counts[pick(rng)];
    for (int i = 0; i < 3; ++i) {
        const double p = meta.probs()[i];
        const double se = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(counts[i] / static_cast<double>(n) - p) <= 3.0 * se);
    }
}

TEST_CASE("disagreement test") {
    const std::vector<double> S = {1.0, 2.0, 4.0};
    const std::vector<int> active = {0, 1, 2};

    SUBCASE("all agree or all query: nothing eliminated") {
        CHECK(disagreement_eliminations(active, S,
                                        {poll(+1, false), poll(+1, false),
                                         poll(+1, false)})
                  .empty());
        CHECK(disagreement_eliminations(active, S,
                                        {poll(+1, true), poll(-1, true),
                                         poll(+1, true)})
                  .empty());
    }
    SUBCASE("S=(1,4) disagree: everything with S <= 1 goes, including itself") {
        const auto out = disagreement_eliminations(
            {0, 2}, S, {poll(+1, false), poll(0, true), poll(-1, false)});
        CHECK(out == std::vector<int>{0});
    }
    SUBCASE("cascade: disagreements (1 vs 4) and (2 vs 4) kill S <= 2") {
        const auto out = disagreement_eliminations(
            active, S, {poll(+1, false), poll(+1, false), poll(-1, false)});
        CHECK(out == std::vector<int>{0, 1});
    }
}

TEST_CASE("observed regret test") {
    const std::vector<int> active = {0, 1};

    SUBCASE("empty V never triggers") {
        std::vector<std::vector<PairStats>> ps(2, std::vector<PairStats>(2));
        CHECK(observed_regret_eliminations(active, ps, 0.1).empty());
    }
    SUBCASE("threshold follows 1.45 sqrt(|V| L(|V|, delta))") {
        std::vector<std::vector<PairStats>> ps(2, std::vector<PairStats>(2));
        ps[0][1].count = 4;
        ps[0][1].sum_capB = 0.0;
        const double slack = 1.45 * std::sqrt(4.0 * bounds::l_term(4, 0.1));
        ps[0][1].loss_diff = slack - 0.01;  // just below
        CHECK(observed_regret_eliminations(active, ps, 0.1).empty());
        ps[0][1].loss_diff = slack + 0.01;  // just above
        CHECK(observed_regret_eliminations(active, ps, 0.1) ==
              std::vector<int>{0});
        // worked instance: 4 > 1.45 sqrt(4 L(4, 0.1)) is false
        ps[0][1].loss_diff = 4.0;
        CHECK(4.0 < slack);
        CHECK(observed_regret_eliminations(active, ps, 0.1).empty());
    }
    SUBCASE("the B budget shifts the threshold") {
        std::vector<std::vector<PairStats>> ps(2, std::vector<PairStats>(2));
        ps[1][0].count = 4;
        ps[1][0].sum_capB = 3.0;
        ps[1][0].loss_diff =
            3.0 + 1.45 * std::sqrt(4.0 * bounds::l_term(4, 0.1)) + 0.01;
        CHECK(observed_regret_eliminations(active, ps, 0.1) ==
              std::vector<int>{1});
    }
}

TEST_CASE("label complexity test") {
    const std::vector<int> active = {0};
    const auto grid = default_epsilon_grid(200, 2.0);

    SUBCASE("no rounds: never triggers") {
        std::vector<LearnerStats> st(1);
        CHECK(label_complexity_eliminations(active, st, grid, 2.0, 0.1, 4, 10)
                  .empty());
    }
    SUBCASE("gamma = 0 makes the bound vacuous") {
        std::vector<LearnerStats> st(1);
        st[0].rounds = 50;
        st[0].sum_I = 50;
        st[0].sum_IB2_quarter = 10.0;
        CHECK(label_complexity_eliminations(active, st,
                                            default_epsilon_grid(200, 0.0), 0.0,
                                            0.1, 4, 100)
                  .empty());
    }
    SUBCASE("hand instance matches an independent grid evaluation") {
        std::vector<LearnerStats> st(1);
        st[0].rounds = 100;
        st[0].sum_I = 90;
        st[0].sum_IB2_quarter = 0.5;
        const double gamma = 2.0, delta = 0.1;
        const long M = 4, t = 100;
        double inf_term = 1e300;
        for (double eps : grid)
            inf_term = std::min(inf_term,
                                3.0 * std::pow(eps, gamma) * 100 + 0.5 / (eps * eps));
        const double thresh =
            inf_term + 2.0 * bounds::l_term(100, delta / (M * std::log2(1200.0)));
        const bool should_trigger = 90.0 > thresh;
        const auto out =
            label_complexity_eliminations(active, st, grid, gamma, delta, M, t);
        CHECK(out.empty() == !should_trigger);
        // and the instance really is a trigger (90 queries vs ~O(30) budget)
        CHECK(should_trigger);
    }
}

TEST_CASE("d test") {
    const std::vector<int> active = {0, 1};
    const std::vector<double> d_values = {1.0, 100.0};
    const std::vector<double> d_consts = {8.0, 8.0};
    std::vector<LearnerStats> st(2);

    SUBCASE("fresh learners never trigger") {
        CHECK(d_eliminations(active, st, d_values, d_consts).empty());
    }
    SUBCASE("capped terms trigger exactly past 16 d queried rounds") {
        // B^2 = 1 capped at 1/2 per queried round; d = 1 -> LHS > 8 at k = 17
        st[0].sum_half_IB2 = 8.0;  // k = 16: exactly at the budget
        CHECK(d_eliminations(active, st, d_values, d_consts).empty());
        st[0].sum_half_IB2 = 8.5;  // k = 17
        CHECK(d_eliminations(active, st, d_values, d_consts) ==
              std::vector<int>{0});
    }
    SUBCASE("nonfrozen constant 432 loosens the budget") {
        const std::vector<double> loose = {432.0, 432.0};
        st[0].sum_half_IB2 = 8.5;
        CHECK(d_eliminations(active, st, d_values, loose).empty());
    }
}

TEST_CASE("single-learner pool reproduces the bare learner exactly") {
    env::EnvironmentModel model;
    model.kind = env::Kind::linear;
    model.dim = 3;
    const auto stream = env::generate(model, env::NoiseProfile{}, 60, 99);

    Learner bare = make_frozen(2.0, 42, 3);
    MetaConfig mc;
    mc.delta = 0.1;
    mc.gamma_exp = 1.0;
    mc.horizon_T = 60;
    std::vector<LearnerSpec> pool;
    pool.push_back({2.0, 64.0, make_frozen(2.0, 42, 3)});
    MetaLearner meta(mc, std::move(pool));
    std::mt19937_64 meta_rng(7);

    for (const auto& record : stream) {
        const auto point = AugmentedPoint::from_raw(record.x);
        const Decision d = bare.observe(point);
        const StepResult s =
            meta.step(point, [&record]() { return record.y; }, meta_rng);
        CHECK(s.prediction == d.action);
        CHECK(s.queried == d.query);
        CHECK(s.decision.U_plus == d.U_plus);
        CHECK(s.decision.U_minus == d.U_minus);
        CHECK(s.decision.B == d.B);
        if (d.query) bare.update(point, d, d.action != record.y ? 1 : 0);
    }
    CHECK(meta.spec(0).base.queries() == bare.queries());
    CHECK(meta.spec(0).base.logdetZ() == bare.logdetZ());
}

TEST_CASE("elimination bumps the epoch and leaves other learners untouched") {
    env::EnvironmentModel model;
    model.kind = env::Kind::linear;
    model.dim = 2;
    const auto stream = env::generate(model, env::NoiseProfile{}, 300, 12);

    MetaConfig mc;
    mc.delta = 0.1;
    mc.gamma_exp = 1.0;
    mc.horizon_T = 300;
    std::vector<LearnerSpec> pool;
    pool.push_back({4.0, 1e-4, make_frozen(4.0, 8)});  // d-test bait
    pool.push_back({4.0, 256.0, make_frozen(4.0, 8)});
    MetaLearner meta(mc, std::move(pool));
    std::mt19937_64 rng(3);

    bool eliminated = false;
    long epoch_before = meta.epoch();
    const auto probs0 = meta.probs();
    for (const auto& record : stream) {
        const auto point = AugmentedPoint::from_raw(record.x);
        if (!eliminated) CHECK(meta.probs() == probs0);  // constant in the epoch
        const StepResult s =
            meta.step(point, [&record]() { return record.y; }, rng);
        if (!s.eliminations.empty()) {
            CHECK(s.eliminations[0].who == 0);
            CHECK(s.eliminations[0].test == "d");
            CHECK(meta.epoch() == epoch_before + 1);
            eliminated = true;
            break;
        }
    }
    CHECK(eliminated);
    CHECK(meta.active() == std::vector<int>{1});
    CHECK(meta.probs() == std::vector<double>{1.0});
}

#include "ntkal/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "ntkal/bounds.hpp"

namespace ntkal::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::uint64_t substream_seed(std::uint64_t base, std::uint64_t trial,
                             std::uint64_t lane) {
    // splitmix64 over the packed triple; decorrelates trial/lane streams.
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (trial * 8 + lane + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

learner::Learner make_base_learner(const ExperimentConfig& config, double S,
                                   std::uint64_t net_seed) {
    nn::NetworkParams net = nn::init_network(2 * config.model.dim, config.width_m,
                                             config.depth_n, net_seed,
                                             config.variant);
    learner::LearnerConfig lc;
    lc.S = S;
    lc.delta = config.delta;
    lc.variant = config.variant;
    lc.horizon_T = config.T;
    lc.force_query = config.force_query;
    lc.train.m = config.width_m;
    lc.train.J = config.train_J;
    lc.train.eta = (config.train_eta > 0.0)
                       ? config.train_eta
                       : 0.5 / (static_cast<double>(config.width_m) *
                                config.depth_n * std::max<long>(config.T, 1));
    return learner::Learner(lc, std::move(net));
}

namespace {

constexpr double kEllipticalBs[] = {0.25, 0.5, 1.0};

long count_elliptical_violations(const std::vector<double>& znorms2,
                                 double logdet_final) {
    long violations = 0;
    for (double b : kEllipticalBs) {
        std::vector<std::pair<double, double>> inc;
        inc.reserve(znorms2.size());
        for (double v : znorms2) inc.emplace_back(b, v);
        if (!bounds::elliptical_check(inc, logdet_final)) ++violations;
    }
    return violations;
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

void write_curves_csv(const std::string& path, const env::ExperimentLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t,R_t,N_t\n";
    out.precision(12);
    for (size_t t = 0; t < log.regret_curve.size(); ++t)
        out << (t + 1) << ',' << log.regret_curve[t] << ',' << log.query_curve[t]
            << '\n';
}

TrialResult run_base_trial(const ExperimentConfig& config,
                           const env::Environment& environment, int trial) {
    TrialResult result;
    result.trial = trial;
    result.excess_risk = std::numeric_limits<double>::quiet_NaN();

    std::mt19937_64 env_rng(substream_seed(config.seed, trial, 0));
    learner::Learner base =
        make_base_learner(config, config.S, substream_seed(config.seed, trial, 1));

    // Online-to-batch: one pre-registered uniform round, snapshot on arrival.
    long t_star = 0;
    if (config.holdout > 0) {
        std::mt19937_64 aux(substream_seed(config.seed, trial, 3));
        t_star = std::uniform_int_distribution<long>(1, std::max<long>(config.T, 1))(aux);
    }
    std::optional<learner::Learner> snapshot;

    env::ExperimentLog log;
    std::vector<double> queried_znorms2;
    std::ofstream trace;
    if (!config.out_dir.empty() && config.full_trace) {
        trace.open(config.out_dir + "/base_trial_" + std::to_string(trial) +
                   ".jsonl");
        if (!trace) throw std::runtime_error("cannot open trace file");
    }

    double prev_gamma = -std::numeric_limits<double>::infinity();
    double prev_logdet = -std::numeric_limits<double>::infinity();
    try {
        for (long t = 1; t <= config.T; ++t) {
            const env::StreamRecord record = environment.draw(env_rng);
            const auto point = learner::AugmentedPoint::from_raw(record.x);
            if (t == t_star) snapshot = base.snapshot();

            const learner::Decision dec = base.observe(point);
            if (base.gamma() < prev_gamma - 1e-12 ||
                base.logdetZ() < prev_logdet - 1e-12)
                ++result.monotone_violations;
            prev_gamma = base.gamma();
            prev_logdet = base.logdetZ();

            if (dec.query) {
                queried_znorms2.push_back(dec.znorm2);
                const int loss = (dec.action != record.y) ? 1 : 0;
                base.update(point, dec, loss);
            }
            log.score(record, dec.action, dec.query);

            if (trace.is_open()) {
                json row = {{"t", t},
                            {"action", dec.action},
                            {"query", dec.query},
                            {"U_plus", dec.U_plus},
                            {"U_minus", dec.U_minus},
                            {"B", dec.B},
                            {"margin_hat", dec.margin_hat},
                            {"logdetZ", base.logdetZ()},
                            {"gamma", base.gamma()},
                            {"queries", base.queries()},
                            {"bayes", record.bayes_action},
                            {"margin", record.margin}};
                trace << row.dump() << '\n';
            }
        }
    } catch (const std::exception& e) {
        result.aborted = true;
        result.message = e.what();
    }

    result.regret = log.regret;
    result.queries = log.queries;
    result.logdetZ_final = base.logdetZ();
    result.gamma_final = base.gamma();
    result.elliptical_violations =
        count_elliptical_violations(queried_znorms2, base.logdetZ());

    if (config.holdout > 0 && snapshot && !result.aborted) {
        std::mt19937_64 hold_rng(substream_seed(config.seed, trial, 2));
        std::vector<env::StreamRecord> holdout;
        holdout.reserve(static_cast<size_t>(config.holdout));
        for (long i = 0; i < config.holdout; ++i)
            holdout.push_back(environment.draw(hold_rng));
        result.excess_risk = env::online_to_batch(
            [&](const Eigen::VectorXd& x) {
                return snapshot->predict(learner::AugmentedPoint::from_raw(x));
            },
            holdout);
    }

    if (!config.out_dir.empty())
        write_curves_csv(config.out_dir + "/base_curves_" + std::to_string(trial) +
                             ".csv",
                         log);
    return result;
}

TrialResult run_modsel_trial(const ExperimentConfig& config,
                             const env::Environment& environment, int trial) {
    TrialResult result;
    result.trial = trial;
    result.excess_risk = std::numeric_limits<double>::quiet_NaN();

    std::mt19937_64 env_rng(substream_seed(config.seed, trial, 0));
    std::mt19937_64 meta_rng(substream_seed(config.seed, trial, 4));

    const std::uint64_t net_seed = substream_seed(config.seed, trial, 1);
    const long hint = std::max<long>(
        16, static_cast<long>(std::pow(std::log2(static_cast<double>(config.T)) + 1, 2)));
    std::vector<modsel::LearnerSpec> pool = modsel::make_pool(
        config.T, hint, config.delta,
        [&](double S) { return make_base_learner(config, S, net_seed); });

    modsel::MetaConfig mc;
    mc.delta = config.delta;
    mc.gamma_exp = config.gamma_exp;
    mc.horizon_T = config.T;
    modsel::MetaLearner meta(mc, std::move(pool));

    env::ExperimentLog log;
    std::vector<std::vector<double>> znorms2(meta.active().size() == 0
                                                 ? 1
                                                 : meta.active().size());
    znorms2.assign(znorms2.size(), {});
    std::ofstream trace;
    if (!config.out_dir.empty() && config.full_trace) {
        trace.open(config.out_dir + "/modsel_trial_" + std::to_string(trial) +
                   ".jsonl");
        if (!trace) throw std::runtime_error("cannot open trace file");
    }

    try {
        for (long t = 1; t <= config.T; ++t) {
            const env::StreamRecord record = environment.draw(env_rng);
            const auto point = learner::AugmentedPoint::from_raw(record.x);
            const modsel::StepResult step =
                meta.step(point, [&record]() { return record.y; }, meta_rng);
            if (step.queried) {
                if (static_cast<size_t>(step.chosen) >= znorms2.size())
                    znorms2.resize(step.chosen + 1);
                znorms2[step.chosen].push_back(step.decision.znorm2);
            }
            result.eliminations += static_cast<long>(step.eliminations.size());
            log.score(record, step.prediction, step.queried);

            if (trace.is_open()) {
                json elims = json::array();
                for (const auto& e : step.eliminations)
                    elims.push_back({{"who", e.who}, {"test", e.test}});
                json row = {{"t", t},
                            {"epoch", meta.epoch()},
                            {"chosen", step.chosen},
                            {"queried", step.queried},
                            {"action", step.prediction},
                            {"active", meta.active()},
                            {"eliminations", elims},
                            {"bayes", record.bayes_action},
                            {"margin", record.margin}};
                trace << row.dump() << '\n';
            }
        }
    } catch (const std::exception& e) {
        result.aborted = true;
        result.message = e.what();
    }

    result.regret = log.regret;
    result.queries = log.queries;
    result.survivors = meta.active();
    for (int i : meta.active()) {
        if (static_cast<size_t>(i) < znorms2.size())
            result.elliptical_violations += count_elliptical_violations(
                znorms2[i], meta.spec(i).base.logdetZ());
    }

    if (!config.out_dir.empty())
        write_curves_csv(config.out_dir + "/modsel_curves_" +
                             std::to_string(trial) + ".csv",
                         log);
    return result;
}

template <typename TrialFn>
SummaryReport run_batch(const ExperimentConfig& config, TrialFn&& run_trial) {
    if (config.trials < 1) throw std::invalid_argument("harness: trials >= 1");
    ensure_dir(config.out_dir);
    const auto start = std::chrono::steady_clock::now();

    env::Environment environment(config.model, config.noise);
    SummaryReport report;
    report.trials.resize(config.trials);

    const int workers = std::max(1, std::min(config.threads, config.trials));
    if (workers == 1) {
        for (int k = 0; k < config.trials; ++k)
            report.trials[k] = run_trial(config, environment, k);
    } else {
        std::vector<std::thread> threads;
        std::atomic<int> next{0};
        for (int w = 0; w < workers; ++w)
            threads.emplace_back([&]() {
                for (int k = next.fetch_add(1); k < config.trials;
                     k = next.fetch_add(1))
                    report.trials[k] = run_trial(config, environment, k);
            });
        for (auto& th : threads) th.join();
    }

    double sum_r = 0, sum_q = 0, sum_e = 0;
    long n_e = 0;
    for (const auto& tr : report.trials) {
        sum_r += tr.regret;
        sum_q += static_cast<double>(tr.queries);
        if (!std::isnan(tr.excess_risk)) {
            sum_e += tr.excess_risk;
            ++n_e;
        }
        report.total_violations +=
            tr.elliptical_violations + tr.monotone_violations;
    }
    report.mean_regret = sum_r / config.trials;
    report.mean_queries = sum_q / config.trials;
    report.mean_excess_risk =
        n_e ? sum_e / n_e : std::numeric_limits<double>::quiet_NaN();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    return report;
}

}  // namespace

SummaryReport run_base(const ExperimentConfig& config) {
    auto report = run_batch(config, run_base_trial);
    if (!config.out_dir.empty())
        write_summary_json(config.out_dir + "/summary.json", config, report, "base");
    return report;
}

SummaryReport run_modsel(const ExperimentConfig& config) {
    auto report = run_batch(config, run_modsel_trial);
    if (!config.out_dir.empty())
        write_summary_json(config.out_dir + "/summary.json", config, report,
                           "modsel");
    return report;
}

NtkRunResult run_ntk(const std::string& points_csv, int depth,
                     const std::string& matrix_out, bool with_h) {
    NtkRunResult result;
    Eigen::VectorXd h;
    ntk::PointSet points =
        with_h ? ntk::read_point_csv(points_csv, &h) : ntk::read_point_csv(points_csv);
    result.report = ntk::ntk_matrix(points, depth);
    if (with_h) result.S = ntk::complexity_S(h, result.report).S;
    if (!matrix_out.empty()) ntk::write_matrix_csv(matrix_out, result.report.H);
    return result;
}

double estimate_S(const env::Environment& environment, int points, int depth,
                  std::uint64_t seed) {
    if (points < 2) throw std::invalid_argument("estimate_S: points >= 2");
    std::mt19937_64 rng(seed);
    std::vector<env::StreamRecord> sample;
    // Collect distinct contexts (pool-based environments repeat points, and
    // duplicates make the subsample kernel singular).
    for (long guard = 0; static_cast<int>(sample.size()) < points &&
                         guard < 200L * points;
         ++guard) {
        env::StreamRecord r = environment.draw(rng);
        bool dup = false;
        for (const auto& s : sample)
            if ((s.x - r.x).norm() < 1e-12) { dup = true; break; }
        if (!dup) sample.push_back(std::move(r));
    }
    const int k = static_cast<int>(sample.size());
    if (k < 2) throw std::runtime_error("estimate_S: environment support too small");

    const int d = static_cast<int>(sample[0].x.size());
    ntk::PointSet aug;
    aug.dim = 2 * d;
    aug.points = Eigen::MatrixXd::Zero(2 * k, 2 * d);
    Eigen::VectorXd h(2 * k);
    for (int j = 0; j < k; ++j) {
        aug.points.row(2 * j).head(d) = sample[j].x.transpose();
        aug.points.row(2 * j + 1).tail(d) = sample[j].x.transpose();
        h(2 * j) = sample[j].h_plus;
        h(2 * j + 1) = 1.0 - sample[j].h_plus;
    }
    const ntk::NtkReport report = ntk::ntk_matrix(aug, depth);
    return ntk::complexity_S(h, report).S;
}

bool verify_trace(const std::string& trace_path, double expected_regret,
                  long expected_queries) {
    std::ifstream in(trace_path);
    if (!in) throw std::runtime_error("cannot open " + trace_path);
    double regret = 0.0;
    long queries = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json row = json::parse(line);
        const int action = row.contains("action") ? row["action"].get<int>() : +1;
        const int bayes = row["bayes"].get<int>();
        const double margin = row["margin"].get<double>();
        if (action != bayes) regret += 2.0 * std::abs(margin);
        const bool q = row.contains("query") ? row["query"].get<bool>()
                                             : row["queried"].get<bool>();
        if (q) ++queries;
    }
    return std::abs(regret - expected_regret) <= 1e-9 &&
           queries == expected_queries;
}

void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const SummaryReport& report, const std::string& mode) {
    json rows = json::array();
    for (const auto& tr : report.trials) {
        json row = {{"trial", tr.trial},
                    {"regret", tr.regret},
                    {"queries", tr.queries},
                    {"logdetZ_final", tr.logdetZ_final},
                    {"gamma_final", tr.gamma_final},
                    {"elliptical_violations", tr.elliptical_violations},
                    {"monotone_violations", tr.monotone_violations},
                    {"aborted", tr.aborted}};
        if (!std::isnan(tr.excess_risk)) row["excess_risk"] = tr.excess_risk;
        if (mode == "modsel") {
            row["survivors"] = tr.survivors;
            row["eliminations"] = tr.eliminations;
        }
        if (tr.aborted) row["message"] = tr.message;
        rows.push_back(row);
    }
    json out = {
        {"mode", mode},
        {"config",
         {{"T", config.T},
          {"trials", config.trials},
          {"seed", config.seed},
          {"m", config.width_m},
          {"n", config.depth_n},
          {"delta", config.delta},
          {"S", config.S},
          {"gamma_exp", config.gamma_exp},
          {"variant", config.variant == nn::Variant::frozen ? "frozen" : "nonfrozen"},
          {"dim", config.model.dim},
          {"alpha", std::isinf(config.noise.alpha) ? -1.0 : config.noise.alpha},
          {"force_query", config.force_query}}},
        {"trial_rows", rows},
        {"mean_regret", report.mean_regret},
        {"mean_queries", report.mean_queries},
        {"total_violations", report.total_violations},
        {"wall_seconds", report.wall_seconds}};
    if (!std::isnan(report.mean_excess_risk))
        out["mean_excess_risk"] = report.mean_excess_risk;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << out.dump(2) << '\n';
}

std::string summarize(const std::string& summary_json_path) {
    std::ifstream in(summary_json_path);
    if (!in) throw std::runtime_error("cannot open " + summary_json_path);
    json j = json::parse(in);
    std::ostringstream os;
    os << "mode: " << j["mode"].get<std::string>() << '\n'
       << "trials: " << j["trial_rows"].size() << '\n'
       << "mean R_T: " << j["mean_regret"].get<double>() << '\n'
       << "mean N_T: " << j["mean_queries"].get<double>() << '\n'
       << "violations: " << j["total_violations"].get<long>() << '\n'
       << "wall s: " << j["wall_seconds"].get<double>() << '\n';
    if (j.contains("mean_excess_risk"))
        os << "mean excess risk: " << j["mean_excess_risk"].get<double>() << '\n';
    return os.str();
}

}  // namespace ntkal::harness

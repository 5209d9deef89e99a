#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ntkal/harness.hpp"

using json = nlohmann::json;
namespace ntk = ntkal::ntk;
namespace env = ntkal::env;
namespace harness = ntkal::harness;

namespace {

double parse_alpha(const std::string& s) {
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    return std::stod(s);
}

env::Kind parse_kind(const std::string& s) {
    if (s == "linear") return env::Kind::linear;
    if (s == "margin") return env::Kind::margin_controlled;
    if (s == "ntk-rkhs") return env::Kind::ntk_rkhs;
    throw CLI::ValidationError("kind must be linear | margin | ntk-rkhs");
}

struct EnvFlags {
    std::string kind = "linear";
    int dim = 2;
    std::string alpha = "1";
    double eps0 = 0.1;
    int rkhs_pool = 16;
    double rkhs_target_S = 2.0;
    std::uint64_t rkhs_seed = 1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--kind", kind, "environment kind: linear | margin | ntk-rkhs");
        cmd->add_option("--dim", dim, "context dimension d");
        cmd->add_option("--alpha", alpha, "low-noise exponent (number or 'inf')");
        cmd->add_option("--eps0", eps0, "hard-margin epsilon (alpha = inf)");
        cmd->add_option("--rkhs-pool", rkhs_pool, "ntk-rkhs pool size");
        cmd->add_option("--rkhs-target-S", rkhs_target_S, "ntk-rkhs target complexity");
        cmd->add_option("--rkhs-seed", rkhs_seed, "ntk-rkhs pool seed");
    }
    void fill(env::EnvironmentModel* model, env::NoiseProfile* noise) const {
        model->kind = parse_kind(kind);
        model->dim = dim;
        model->rkhs_pool_size = rkhs_pool;
        model->rkhs_target_S = rkhs_target_S;
        model->rkhs_seed = rkhs_seed;
        noise->alpha = parse_alpha(alpha);
        noise->hard_margin_eps = eps0;
    }
};

struct RunFlags {
    long T = 1000;
    int trials = 1;
    std::uint64_t seed = 1;
    int m = 32;
    int n = 2;
    double delta = 0.05;
    double S = 1.0;
    std::string variant = "frozen";
    bool force_query = false;
    double gamma = 1.0;
    long holdout = 0;
    int threads = 1;
    std::string out_dir;
    bool full_trace = false;
    double eta = 0.0;
    int J = 100;

    void attach(CLI::App* cmd) {
        cmd->add_option("--T", T, "horizon");
        cmd->add_option("--trials", trials, "number of trials");
        cmd->add_option("--seed", seed, "base seed");
        cmd->add_option("--m", m, "network width");
        cmd->add_option("--n", n, "network depth");
        cmd->add_option("--delta", delta, "confidence level");
        cmd->add_option("--S", S, "complexity parameter");
        cmd->add_option("--variant", variant, "frozen | nonfrozen");
        cmd->add_flag("--force-query", force_query, "query every round (passive)");
        cmd->add_option("--gamma", gamma, "meta exploration exponent");
        cmd->add_option("--holdout", holdout, "online-to-batch holdout size");
        cmd->add_option("--threads", threads, "worker threads");
        cmd->add_option("--out-dir", out_dir, "output directory");
        cmd->add_flag("--full-trace", full_trace, "write per-round JSONL traces");
        cmd->add_option("--eta", eta, "TrainNN step size (0 = auto)");
        cmd->add_option("--J", J, "TrainNN gradient steps");
    }
    void fill(harness::ExperimentConfig* config) const {
        config->T = T;
        config->trials = trials;
        config->seed = seed;
        config->width_m = m;
        config->depth_n = n;
        config->delta = delta;
        config->S = S;
        if (variant == "frozen")
            config->variant = ntkal::nn::Variant::frozen;
        else if (variant == "nonfrozen")
            config->variant = ntkal::nn::Variant::nonfrozen;
        else
            throw CLI::ValidationError("variant must be frozen | nonfrozen");
        config->force_query = force_query;
        config->gamma_exp = gamma;
        config->holdout = holdout;
        config->threads = threads;
        config->out_dir = out_dir;
        config->full_trace = full_trace;
        config->train_eta = eta;
        config->train_J = J;
    }
};

void print_summary(const harness::SummaryReport& report) {
    std::cout << "trials: " << report.trials.size()
              << "  mean R_T: " << report.mean_regret
              << "  mean N_T: " << report.mean_queries
              << "  violations: " << report.total_violations
              << "  wall s: " << report.wall_seconds << '\n';
    if (!std::isnan(report.mean_excess_risk))
        std::cout << "mean excess risk: " << report.mean_excess_risk << '\n';
    for (const auto& tr : report.trials)
        if (tr.aborted)
            std::cout << "trial " << tr.trial << " aborted: " << tr.message << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NTK selective-sampling experiment runner"};
    app.require_subcommand(1);

    // ntk: kernel report over a CSV point set
    auto* ntk_cmd = app.add_subcommand("ntk", "compute the NTK report for a point set");
    std::string points_csv, matrix_out;
    int depth = 2;
    bool with_h = false;
    double ntk_delta = 0.05;
    long ntk_M = 1;
    ntk_cmd->add_option("--points", points_csv, "point-set CSV")->required();
    ntk_cmd->add_option("--depth", depth, "network depth n >= 2");
    ntk_cmd->add_flag("--with-h", with_h, "last CSV column is the target h");
    ntk_cmd->add_option("--matrix-out", matrix_out, "write full H as CSV");
    ntk_cmd->add_option("--delta", ntk_delta, "delta for the d diagnostic");
    ntk_cmd->add_option("--M", ntk_M, "pool size for the d diagnostic");

    // datagen: dump a stream as CSV
    auto* datagen = app.add_subcommand("datagen", "generate a synthetic stream");
    EnvFlags gen_env;
    gen_env.attach(datagen);
    long gen_T = 1000;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    datagen->add_option("--T", gen_T, "number of records");
    datagen->add_option("--seed", gen_seed, "stream seed");
    datagen->add_option("--out", gen_out, "output CSV")->required();

    auto* run_base = app.add_subcommand("run-base", "run the base selective sampler");
    EnvFlags base_env;
    RunFlags base_run;
    base_env.attach(run_base);
    base_run.attach(run_base);

    auto* run_modsel =
        app.add_subcommand("run-modsel", "run regret-balancing model selection");
    EnvFlags ms_env;
    RunFlags ms_run;
    ms_env.attach(run_modsel);
    ms_run.attach(run_modsel);

    auto* verify = app.add_subcommand("verify-trace",
                                      "recompute summary rows from JSONL traces");
    std::string verify_dir, verify_mode = "base";
    verify->add_option("--dir", verify_dir, "output directory of a previous run")
        ->required();
    verify->add_option("--mode", verify_mode, "base | modsel");

    auto* summ = app.add_subcommand("summarize", "print aggregates of a summary.json");
    std::string summ_path;
    summ->add_option("--summary", summ_path, "summary.json path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ntk_cmd) {
            const harness::NtkRunResult result =
                harness::run_ntk(points_csv, depth, matrix_out, with_h);
            json out = {{"lambda0", result.report.lambda0},
                        {"L_H", result.report.L_H},
                        {"depth", result.report.depth}};
            if (result.S) {
                out["S"] = *result.S;
                out["d"] = ntk::d_diagnostic(*result.S, ntk_delta, result.report,
                                             ntk_M);
            }
            std::cout << out.dump(2) << '\n';
        } else if (*datagen) {
            env::EnvironmentModel model;
            env::NoiseProfile noise;
            gen_env.fill(&model, &noise);
            const auto stream = env::generate(model, noise, gen_T, gen_seed);
            std::ofstream out(gen_out);
            if (!out) throw std::runtime_error("cannot open " + gen_out);
            out.precision(17);
            for (const auto& r : stream) {
                for (int i = 0; i < r.x.size(); ++i) out << r.x(i) << ',';
                out << r.h_plus << ',' << r.y << ',' << r.bayes_action << ','
                    << r.margin << '\n';
            }
            std::cout << "wrote " << stream.size() << " records to " << gen_out
                      << '\n';
        } else if (*run_base) {
            harness::ExperimentConfig config;
            base_env.fill(&config.model, &config.noise);
            base_run.fill(&config);
            print_summary(harness::run_base(config));
        } else if (*run_modsel) {
            harness::ExperimentConfig config;
            ms_env.fill(&config.model, &config.noise);
            ms_run.fill(&config);
            print_summary(harness::run_modsel(config));
        } else if (*verify) {
            std::ifstream in(verify_dir + "/summary.json");
            if (!in) throw std::runtime_error("missing summary.json in " + verify_dir);
            json summary = json::parse(in);
            bool all_ok = true;
            long checked = 0;
            for (const auto& row : summary["trial_rows"]) {
                const int k = row["trial"].get<int>();
                const std::string trace = verify_dir + "/" + verify_mode +
                                          "_trial_" + std::to_string(k) + ".jsonl";
                if (!std::ifstream(trace)) continue;
                ++checked;
                const bool ok = harness::verify_trace(
                    trace, row["regret"].get<double>(), row["queries"].get<long>());
                if (!ok) {
                    all_ok = false;
                    std::cout << "trial " << k << ": MISMATCH\n";
                }
            }
            std::cout << (all_ok ? "OK" : "FAILED") << " (" << checked
                      << " traces checked)\n";
            return all_ok ? 0 : 1;
        } else if (*summ) {
            std::cout << harness::summarize(summ_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#ifndef NTKAL_HARNESS_HPP
#define NTKAL_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntkal/environment.hpp"
#include "ntkal/learner.hpp"
#include "ntkal/modsel.hpp"
#include "ntkal/ntk.hpp"

namespace ntkal::harness {

struct ExperimentConfig {
    env::EnvironmentModel model;
    env::NoiseProfile noise;
    long T = 1000;
    int trials = 1;
    std::uint64_t seed = 1;  // base seed; trial k derives its own streams
    int width_m = 32;
    int depth_n = 2;
    double delta = 0.05;
    double S = 1.0;                          // base-learner complexity knob
    nn::Variant variant = nn::Variant::frozen;
    bool force_query = false;                // passive reference (B = inf)
    double gamma_exp = 1.0;                  // meta exploration exponent
    double train_eta = 0.0;                  // 0 -> default 0.5/(m n T)
    int train_J = 100;
    long holdout = 0;                        // online-to-batch sample size; 0 = skip
    int threads = 1;
    std::string out_dir;                     // empty -> no files written
    bool full_trace = false;                 // per-round JSONL
};

struct TrialResult {
    int trial = 0;
    double regret = 0.0;           // R_T
    long queries = 0;              // N_T
    double excess_risk = 0.0;      // NaN when no holdout configured
    double logdetZ_final = 0.0;
    double gamma_final = 0.0;
    long elliptical_violations = 0;  // over b in {1/4, 1/2, 1}
    long monotone_violations = 0;    // gamma / logdet ever decreasing
    std::vector<int> survivors;      // modsel only
    long eliminations = 0;           // modsel only
    bool aborted = false;
    std::string message;
};

struct SummaryReport {
    std::vector<TrialResult> trials;
    double mean_regret = 0.0;
    double mean_queries = 0.0;
    double mean_excess_risk = 0.0;
    long total_violations = 0;
    double wall_seconds = 0.0;
};

// Deterministic per-trial stream splitting (splitmix64 over (seed, trial, lane)).
std::uint64_t substream_seed(std::uint64_t base, std::uint64_t trial,
                             std::uint64_t lane);

// Builds the per-trial base learner exactly as run_base does; exposed so the
// model-selection pool and equivalence tests share the construction.
learner::Learner make_base_learner(const ExperimentConfig& config, double S,
                                   std::uint64_t net_seed);

SummaryReport run_base(const ExperimentConfig& config);
SummaryReport run_modsel(const ExperimentConfig& config);

struct NtkRunResult {
    ntk::NtkReport report;
    std::optional<double> S;  // set when an h column was supplied
};
// CLI face of the kernel computation: load points (and optionally h) from
// CSV, emit the report (and optional full-matrix dump).
NtkRunResult run_ntk(const std::string& points_csv, int depth,
                     const std::string& matrix_out, bool with_h);

// Estimate the stream complexity S by sampling `points` rounds from the
// environment and solving on that subsample's NTK.
double estimate_S(const env::Environment& environment, int points, int depth,
                  std::uint64_t seed);

// Recompute a summary row from its per-round JSONL trace; returns true when
// regret and query totals match to 1e-9 / exactly.
bool verify_trace(const std::string& trace_path, double expected_regret,
                  long expected_queries);

// Pretty aggregate of a summary.json written by run_base / run_modsel.
std::string summarize(const std::string& summary_json_path);

void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const SummaryReport& report, const std::string& mode);

}  // namespace ntkal::harness

#endif

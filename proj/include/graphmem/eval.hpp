#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "graphmem/config.hpp"
#include "graphmem/types.hpp"

namespace graphmem {

struct TrainState;  // learn.hpp

// Ranking metrics --------------------------------------------------------
//
// `ranked` is a retrieval result in rank order; `relevant` the ground-truth
// positive ids. Binary relevance throughout.

double ndcg_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k);
double map_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k);
double mrr(const std::vector<int>& ranked, const std::set<int>& relevant);
double precision_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k);
double recall_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k);

/// Memory precision: fraction of the top-k retrieved timesteps that fall
/// within +/- `window` steps (inclusive) of any expert state.
double mp_at_k(const std::vector<int>& ranked_timesteps, const std::set<int>& expert_states,
               int k, int window = 5);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

/// Precision/recall points over every prefix of the ranking, prepended
/// with (0, 1). auc is the trapezoidal area under the curve.
struct PrCurve {
    std::vector<PrPoint> points;
    double auc = 0.0;
};

PrCurve pr_curve(const std::vector<int>& ranked, const std::set<int>& relevant);

// Retrieval benchmark ----------------------------------------------------

/// Synthetic clustered item stream: `clusters` unit directions, each item
/// a noisy copy of its cluster direction, timesteps 1..T.
std::vector<ProjectedItem> clustered_items(int T, int clusters, int d, double noise,
                                           std::mt19937_64& rng);

struct BenchRow {
    int T = 0;
    double node_evaluations = 0.0;  // mean per query
    double latency_ns = 0.0;        // mean per query
    double overlap_exact = 0.0;     // mean top-k overlap with the exact scan
};

/// Builds the two-tier index over a clustered stream at each T, runs
/// `queries` cluster-direction queries, and compares the candidate set's
/// top-k against the exact full scan.
std::vector<BenchRow> bench_retrieval(const std::vector<int>& sizes, int clusters, int d,
                                      double noise, int queries, int k, uint64_t seed,
                                      int window = 20, int rebuild_every = 10, int beam = 2);

/// "T,node_evaluations,latency_ns,overlap_exact" with a header line.
std::string bench_csv(const std::vector<BenchRow>& rows);

// Model evaluation -------------------------------------------------------

struct MetricSummary {
    double mean = 0.0;
    double ci95 = 0.0;  // 1.96 * stderr over folds
};

struct EvalReport {
    int folds = 0;
    int episodes_per_fold = 0;
    std::vector<std::pair<std::string, MetricSummary>> metrics;

    std::string to_json_string(const RunConfig& cfg) const;
};

/// Greedy-policy evaluation on held-out episodes, split into `folds`
/// folds. Reports success_rate plus retrieval metrics computed against
/// the expert cue step (relevant items = those within +/-0 of the cue;
/// mp@k uses the +/-5 window).
EvalReport evaluate_model(const TrainState& state, const RunConfig& cfg, int episodes,
                          int folds = 3, uint64_t eval_seed_offset = 0x6576ULL);

}  // namespace graphmem

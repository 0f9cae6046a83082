#include "graphmem/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "graphmem/env.hpp"
#include "graphmem/graph.hpp"
#include "graphmem/index.hpp"
#include "graphmem/learn.hpp"
#include "graphmem/rng.hpp"
#include "json.hpp"

namespace graphmem {

using nlohmann::json;

// Ranking metrics --------------------------------------------------------

double ndcg_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
    if (relevant.empty()) return 0.0;
    const int n = std::min<int>(k, static_cast<int>(ranked.size()));
    double dcg = 0.0;
    for (int r = 0; r < n; ++r)
        if (relevant.count(ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    const int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
    double idcg = 0.0;
    for (int r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return dcg / idcg;
}

double map_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
    if (relevant.empty()) return 0.0;
    const int n = std::min<int>(k, static_cast<int>(ranked.size()));
    int hits = 0;
    double ap = 0.0;
    for (int r = 0; r < n; ++r) {
        if (relevant.count(ranked[r])) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    const int denom = std::min<int>(k, static_cast<int>(relevant.size()));
    return denom > 0 ? ap / static_cast<double>(denom) : 0.0;
}

double mrr(const std::vector<int>& ranked, const std::set<int>& relevant) {
    for (size_t r = 0; r < ranked.size(); ++r)
        if (relevant.count(ranked[r])) return 1.0 / static_cast<double>(r + 1);
    return 0.0;
}

double precision_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
    if (k <= 0) return 0.0;
    const int n = std::min<int>(k, static_cast<int>(ranked.size()));
    int hits = 0;
    for (int r = 0; r < n; ++r) hits += relevant.count(ranked[r]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(k);
}

double recall_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
    if (relevant.empty()) return 0.0;
    const int n = std::min<int>(k, static_cast<int>(ranked.size()));
    int hits = 0;
    for (int r = 0; r < n; ++r) hits += relevant.count(ranked[r]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double mp_at_k(const std::vector<int>& ranked_timesteps, const std::set<int>& expert_states,
               int k, int window) {
    const int n = std::min<int>(k, static_cast<int>(ranked_timesteps.size()));
    if (n == 0) return 0.0;
    int hits = 0;
    for (int r = 0; r < n; ++r) {
        const int t = ranked_timesteps[r];
        for (int s : expert_states)
            if (std::abs(t - s) <= window) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

PrCurve pr_curve(const std::vector<int>& ranked, const std::set<int>& relevant) {
    if (relevant.empty()) throw std::invalid_argument("pr_curve: no positive labels");
    PrCurve curve;
    curve.points.push_back({0.0, 1.0});
    int hits = 0;
    for (size_t r = 0; r < ranked.size(); ++r) {
        hits += relevant.count(ranked[r]) ? 1 : 0;
        curve.points.push_back({static_cast<double>(hits) / relevant.size(),
                                static_cast<double>(hits) / static_cast<double>(r + 1)});
    }
    for (size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        curve.auc += (b.recall - a.recall) * 0.5 * (a.precision + b.precision);
    }
    return curve;
}

// Retrieval benchmark ----------------------------------------------------

std::vector<ProjectedItem> clustered_items(int T, int clusters, int d, double noise,
                                           std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec> centers(clusters);
    for (auto& c : centers) {
        c = Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });
        c.normalize();
    }
    std::uniform_int_distribution<int> pick(0, clusters - 1);
    std::vector<ProjectedItem> items(T);
    for (int t = 0; t < T; ++t) {
        const int c = pick(rng);
        Vec e = centers[c] +
                noise * Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });
        items[t] = {t + 1, Modality::Visual, std::move(e)};
    }
    return items;
}

std::vector<BenchRow> bench_retrieval(const std::vector<int>& sizes, int clusters, int d,
                                      double noise, int queries, int k, uint64_t seed,
                                      int window, int rebuild_every, int beam) {
    std::vector<BenchRow> rows;
    for (int T : sizes) {
        auto rng = make_rng(seed, 0x62656e63ULL + static_cast<uint64_t>(T));
        const auto items = clustered_items(T, clusters, d, noise, rng);
        MemoryIndex index(mix_seed(seed) + T, window, rebuild_every);
        for (const auto& it : items) index.insert(it);

        std::normal_distribution<double> gauss(0.0, 1.0);
        BenchRow row;
        row.T = T;
        for (int q = 0; q < queries; ++q) {
            Vec query = items[q % T].e +
                        0.05 * Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });
            const auto t0 = std::chrono::steady_clock::now();
            const Retrieval got = index.retrieve(query, k, beam);
            const auto t1 = std::chrono::steady_clock::now();
            row.latency_ns +=
                std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
            row.node_evaluations += got.node_evaluations;

            const Retrieval exact = retrieve_exact(items, query, k);
            std::set<int> exact_ids(exact.ids.begin(), exact.ids.end());
            int overlap = 0;
            for (int id : got.ids) overlap += exact_ids.count(id) ? 1 : 0;
            row.overlap_exact +=
                static_cast<double>(overlap) / static_cast<double>(exact.ids.size());
        }
        const double inv_q = 1.0 / static_cast<double>(queries);
        row.node_evaluations *= inv_q;
        row.latency_ns *= inv_q;
        row.overlap_exact *= inv_q;
        rows.push_back(row);
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "T,node_evaluations,latency_ns,overlap_exact\n";
    for (const auto& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%d,%.2f,%.0f,%.4f\n", r.T, r.node_evaluations,
                      r.latency_ns, r.overlap_exact);
        out << buf;
    }
    return out.str();
}

// Model evaluation -------------------------------------------------------

std::string EvalReport::to_json_string(const RunConfig& cfg) const {
    json m = json::object();
    for (const auto& [name, s] : metrics) m[name] = {{"mean", s.mean}, {"ci95", s.ci95}};
    json j = {{"config", json::parse(cfg.to_json_string())},
              {"folds", folds},
              {"episodes_per_fold", episodes_per_fold},
              {"metrics", m}};
    return j.dump(2);
}

EvalReport evaluate_model(const TrainState& state, const RunConfig& cfg, int episodes,
                          int folds, uint64_t eval_seed_offset) {
    const EnvConfig env = EnvConfig::from_run_config(cfg);
    RolloutOptions opts;
    opts.graph_mode = cfg.graph_mode;
    opts.cosine_tau = cfg.graph_cosine_tau;
    opts.hierarchy = cfg.hierarchy;
    opts.sample_edges = false;
    opts.sample_actions = false;
    opts.window = cfg.window;
    opts.rebuild_every = cfg.rebuild_every;
    opts.beam = cfg.beam;

    const std::vector<std::string> names = {"success_rate", "ndcg@k", "map@k", "mrr",
                                            "precision@k", "recall@k", "mp@k"};
    const int per_fold = std::max(1, episodes / folds);
    std::vector<std::vector<double>> fold_means(names.size());

    for (int f = 0; f < folds; ++f) {
        std::vector<double> sums(names.size(), 0.0);
        for (int i = 0; i < per_fold; ++i) {
            const uint64_t ep_seed = mix_seed(cfg.seed) + eval_seed_offset +
                                     static_cast<uint64_t>(f) * per_fold +
                                     static_cast<uint64_t>(i);
            const RolloutRecord rec = rollout(state, env, ep_seed, opts);
            sums[0] += rec.reward;

            // Rank the final step's pool by cosine to the query; the cue
            // step's items are the relevant set.
            const StepRecord& last = rec.steps.back();
            std::vector<int> pool;
            for (const auto& p : last.pools) pool.insert(pool.end(), p.begin(), p.end());
            std::sort(pool.begin(), pool.end(), [&](int a, int b) {
                const double sa = cosine(last.query_e, rec.items[a].e);
                const double sb = cosine(last.query_e, rec.items[b].e);
                if (sa != sb) return sa > sb;
                return rec.items[a].t < rec.items[b].t;
            });
            std::set<int> relevant;
            std::vector<int> timesteps;
            for (int id : pool) timesteps.push_back(rec.items[id].t);
            for (size_t id = 0; id < rec.items.size(); ++id)
                if (rec.episode.expert_states.count(rec.items[id].t))
                    relevant.insert(static_cast<int>(id));
            sums[1] += ndcg_at_k(pool, relevant, cfg.top_k);
            sums[2] += map_at_k(pool, relevant, cfg.top_k);
            sums[3] += mrr(pool, relevant);
            sums[4] += precision_at_k(pool, relevant, cfg.top_k);
            sums[5] += recall_at_k(pool, relevant, cfg.top_k);
            sums[6] += mp_at_k(timesteps, rec.episode.expert_states, cfg.top_k);
        }
        for (size_t n = 0; n < names.size(); ++n)
            fold_means[n].push_back(sums[n] / static_cast<double>(per_fold));
    }

    EvalReport report;
    report.folds = folds;
    report.episodes_per_fold = per_fold;
    for (size_t n = 0; n < names.size(); ++n) {
        const auto& v = fold_means[n];
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
        const double ci = 1.96 * std::sqrt(var / static_cast<double>(v.size()));
        report.metrics.push_back({names[n], {mean, ci}});
    }
    return report;
}

}  // namespace graphmem

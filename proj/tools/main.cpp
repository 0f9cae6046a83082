// Command-line front end: generate / train / evaluate / bench / retrieve.
// Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 internal error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "graphmem/dataset.hpp"
#include "graphmem/env.hpp"
#include "graphmem/eval.hpp"
#include "graphmem/graph.hpp"
#include "graphmem/index.hpp"
#include "graphmem/learn.hpp"
#include "graphmem/rng.hpp"

namespace {

using namespace graphmem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitInternal = 4;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string decay;
    std::string graph;
    std::string hierarchy;
    std::string stage2;
    uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "key=value config file");
    cmd->add_option("--set", o.sets, "override a single config key (key=value)");
    cmd->add_option("--decay", o.decay, "decay ablation: learned|uniform|none");
    cmd->add_option("--graph", o.graph, "graph ablation: learned|threshold:<tau>|dense");
    cmd->add_option("--hierarchy", o.hierarchy, "hierarchical index: on|off");
    cmd->add_option("--stage2", o.stage2, "second training stage: on|off");
    cmd->add_option("--seed", o.seed, "run seed")->each([&o](const std::string&) {
        o.seed_set = true;
    });
}

RunConfig build_config(const CommonOpts& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) cfg = load_config_file(o.config_path, cfg);
    for (const std::string& kv : o.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw config_error("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!o.decay.empty()) cfg.set("decay", o.decay);
    if (!o.graph.empty()) cfg.set("graph", o.graph);
    if (!o.hierarchy.empty()) cfg.set("hierarchy", o.hierarchy);
    if (!o.stage2.empty()) cfg.set("stage2", o.stage2);
    if (o.seed_set) cfg.set("seed", std::to_string(o.seed));
    cfg.validate();
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw io_error("write failed: " + path);
}

int cmd_generate(const CommonOpts& o, int episodes, const std::string& out_path) {
    const RunConfig cfg = build_config(o);
    const EnvConfig env = EnvConfig::from_run_config(cfg);
    Dataset ds;
    ds.header.d_raw = cfg.d_raw;
    ds.header.action_type_names = action_type_names();
    for (int i = 0; i < episodes; ++i) {
        auto rng = make_rng(cfg.seed, 0x67656eULL + static_cast<uint64_t>(i));
        ds.episodes.push_back(generate_episode(env, rng, "ep-" + std::to_string(i)));
    }
    save_dataset(ds, out_path);
    std::cerr << "wrote " << episodes << " episodes to " << out_path << "\n";
    return kExitOk;
}

int cmd_train(const CommonOpts& o, const std::string& ckpt_path,
              const std::string& metrics_path) {
    const RunConfig cfg = build_config(o);
    TrainResult result = train(cfg);
    if (!metrics_path.empty()) write_text(metrics_path, result.metrics_csv);
    if (!ckpt_path.empty()) save_checkpoint(result.state, cfg, ckpt_path);
    std::fprintf(stderr, "stage1 edge loss: %.6f -> %.6f\n", result.stage1_initial_loss,
                 result.stage1_final_loss);
    return kExitOk;
}

int cmd_evaluate(const CommonOpts& o, const std::string& ckpt_path, int episodes,
                 const std::string& out_path) {
    auto [state, ckpt_cfg] = load_checkpoint(ckpt_path);
    // CLI ablation flags override the checkpointed config at eval time.
    RunConfig cfg = ckpt_cfg;
    for (const std::string& kv : o.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw config_error("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!o.decay.empty()) cfg.set("decay", o.decay);
    if (!o.graph.empty()) cfg.set("graph", o.graph);
    if (!o.hierarchy.empty()) cfg.set("hierarchy", o.hierarchy);
    if (o.seed_set) cfg.set("seed", std::to_string(o.seed));
    cfg.validate();
    const EvalReport report = evaluate_model(state, cfg, episodes);
    write_text(out_path, report.to_json_string(cfg) + "\n");
    return kExitOk;
}

int cmd_bench(const CommonOpts& o, const std::vector<int>& sizes, int queries,
              const std::string& out_path) {
    const RunConfig cfg = build_config(o);
    const auto rows = bench_retrieval(sizes, 8, cfg.d, 0.1, queries, cfg.top_k, cfg.seed,
                                      cfg.window, cfg.rebuild_every, cfg.beam);
    write_text(out_path, bench_csv(rows));
    return kExitOk;
}

int cmd_retrieve(const CommonOpts& o, const std::string& ckpt_path,
                 const std::string& data_path, int episode_index, int k) {
    auto [state, cfg] = load_checkpoint(ckpt_path);
    const Dataset ds = load_dataset(data_path);
    if (episode_index < 0 || episode_index >= static_cast<int>(ds.episodes.size()))
        throw config_error("episode index out of range");
    const Episode& ep = ds.episodes[episode_index];
    auto items = project_episode(ep, state.projections);
    const RelevanceGraph graph = build_graph(items, state.predictor);
    const auto stats = sparsity_stats(graph);
    std::fprintf(stdout, "# nodes=%zu edges=%zu edges_per_node=%.3f\n", graph.nodes.size(),
                 graph.edges.size(), stats.edges_per_node);

    // Rank memory items against the final observation's fused embedding.
    const Observation& last = ep.observations.back();
    auto q_items = project(last, state.projections);
    Vec query = Vec::Zero(state.d());
    for (const auto& qi : q_items) query += qi.e;
    query /= static_cast<double>(kNumModalities);
    std::vector<ProjectedItem> memory;
    for (const auto& node : graph.nodes)
        if (node.t < last.t) memory.push_back(node);
    const Retrieval got = retrieve_exact(memory, query, k);

    // attention weights over the same memory pool, for inspection
    std::array<Pool, kNumModalities> pools;
    std::array<std::vector<size_t>, kNumModalities> pool_rank;
    for (size_t i = 0; i < memory.size(); ++i) {
        const int m = static_cast<int>(memory[i].m);
        pools[m].push_back(&memory[i]);
        pool_rank[m].push_back(i);
    }
    FuseCache fc;
    fuse(query, last.t, pools, state.decay, &fc);
    std::vector<double> alpha(memory.size(), 0.0);
    for (int m = 0; m < kNumModalities; ++m)
        for (size_t p = 0; p < pool_rank[m].size(); ++p)
            alpha[pool_rank[m][p]] = fc.alpha[m][static_cast<int>(p)];

    for (size_t r = 0; r < got.ids.size(); ++r) {
        const ProjectedItem& it = memory[got.ids[r]];
        std::fprintf(stdout, "%zu t=%d m=%s score=%.6f alpha=%.6f\n", r + 1, it.t,
                     modality_name(it.m), got.scores[r], alpha[got.ids[r]]);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"task-adaptive graph-memory retriever"};
    app.require_subcommand(1);

    CommonOpts gen_o, train_o, eval_o, bench_o, ret_o;

    auto* gen = app.add_subcommand("generate", "generate a synthetic episode dataset");
    int gen_episodes = 100;
    std::string gen_out = "dataset.jsonl";
    gen->add_option("--episodes", gen_episodes, "number of episodes");
    gen->add_option("--out", gen_out, "output path");
    add_common(gen, gen_o);

    auto* tr = app.add_subcommand("train", "run the two-stage training schedule");
    std::string tr_ckpt = "checkpoint.json";
    std::string tr_metrics = "metrics.csv";
    tr->add_option("--checkpoint", tr_ckpt, "checkpoint output path");
    tr->add_option("--metrics", tr_metrics, "metrics CSV output path");
    add_common(tr, train_o);

    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on held-out episodes");
    std::string ev_ckpt;
    std::string ev_out = "-";
    int ev_episodes = 60;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--episodes", ev_episodes, "total held-out episodes");
    ev->add_option("--out", ev_out, "report output path (- for stdout)");
    add_common(ev, eval_o);

    auto* be = app.add_subcommand("bench", "benchmark the two-tier index");
    std::vector<int> be_sizes = {100, 200, 500, 1000};
    int be_queries = 50;
    std::string be_out = "-";
    be->add_option("--sizes", be_sizes, "stream lengths to benchmark");
    be->add_option("--queries", be_queries, "queries per stream length");
    be->add_option("--out", be_out, "CSV output path (- for stdout)");
    add_common(be, bench_o);

    auto* re = app.add_subcommand("retrieve", "build the graph and rank one episode");
    std::string re_ckpt, re_data;
    int re_episode = 0, re_k = 10;
    re->add_option("--checkpoint", re_ckpt, "checkpoint path")->required();
    re->add_option("--data", re_data, "dataset path")->required();
    re->add_option("--episode", re_episode, "episode index");
    re->add_option("--k", re_k, "results to print");
    add_common(re, ret_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_o, gen_episodes, gen_out);
        if (tr->parsed()) return cmd_train(train_o, tr_ckpt, tr_metrics);
        if (ev->parsed()) return cmd_evaluate(eval_o, ev_ckpt, ev_episodes, ev_out);
        if (be->parsed()) return cmd_bench(bench_o, be_sizes, be_queries, be_out);
        if (re->parsed()) return cmd_retrieve(ret_o, re_ckpt, re_data, re_episode, re_k);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitConfig;
}

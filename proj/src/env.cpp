#include "graphmem/env.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <unordered_set>

#include "graphmem/graph.hpp"
#include "graphmem/index.hpp"
#include "graphmem/learn.hpp"
#include "graphmem/rng.hpp"

namespace graphmem {

EnvConfig EnvConfig::from_run_config(const RunConfig& cfg) {
    EnvConfig e;
    e.T = cfg.env_T;
    e.d_raw = cfg.d_raw;
    e.n_actions = cfg.n_actions;
    e.key_modality = cfg.key_modality;
    e.distractor_strength = cfg.distractor_strength;
    e.recency_bias = cfg.recency_bias;
    return e;
}

namespace {

// Raw-vector layout: [0, n_actions) answer block, [n_actions, n_actions+4)
// action-type signature block, the rest free content coordinates.
constexpr int kTypeBlock = 4;
constexpr double kTypeSignature = 0.5;
constexpr double kCueBase = 3.0;
constexpr double kCueBump = 2.0;

Vec content_gauss(int d_raw, int content_start, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v = Vec::Zero(d_raw);
    for (int i = content_start; i < d_raw; ++i) v[i] = gauss(rng);
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return v;
}

void add_type_signature(Vec& v, int type, int n_actions) {
    v[n_actions + (type % kTypeBlock)] += kTypeSignature;
}

}  // namespace

Episode generate_episode(const EnvConfig& cfg, std::mt19937_64& rng,
                         const std::string& task_id) {
    if (cfg.T < 6) throw std::invalid_argument("env: T must be >= 6");
    const int content_start = cfg.n_actions + kTypeBlock;
    if (cfg.d_raw < content_start + 8)
        throw std::invalid_argument("env: d_raw too small for the vector layout");

    Episode ep;
    ep.task_id = task_id;

    std::uniform_int_distribution<int> cue_dist(2, cfg.T - 4);
    std::uniform_int_distribution<int> action_dist(0, cfg.n_actions - 1);
    std::uniform_int_distribution<int> type_dist(0, kTypeBlock - 1);
    const int cue_t = cue_dist(rng);
    const int answer = action_dist(rng);
    // Two late decoys sit in the cosine band (0.5, 0.6) to the query:
    // above a naive 0.5 similarity cut, below the 0.6 relevance boundary.
    // Their norm is boosted so the query dot-product matches the cue's,
    // and recency favors them; each carries a wrong answer.
    std::uniform_int_distribution<int> decoy_dist(0, 2);
    const int decoy_t1 = cfg.T - 3 + decoy_dist(rng);
    const int decoy_t2 = cfg.T - 3 + (decoy_t1 - (cfg.T - 3) + 1 + decoy_dist(rng) % 2) % 3;
    std::array<int, 2> decoy_answer;
    for (int& a : decoy_answer)
        a = (answer + 1 + action_dist(rng) % (cfg.n_actions - 1)) % cfg.n_actions;
    Modality key_mod;
    if (cfg.key_modality == "mix") {
        std::uniform_int_distribution<int> mod_dist(0, kNumModalities - 1);
        key_mod = static_cast<Modality>(mod_dist(rng));
    } else {
        key_mod = modality_from_name(cfg.key_modality);
    }

    // Per-modality query directions, zero on the reserved blocks.
    std::array<Vec, kNumModalities> q;
    for (int m = 0; m < kNumModalities; ++m) q[m] = content_gauss(cfg.d_raw, content_start, rng);

    // Distractor noise streams with modality-specific temporal character:
    // visual resamples every step, text drifts slowly, knowledge resamples
    // every third step.
    std::array<Vec, kNumModalities> noise;
    for (int m = 0; m < kNumModalities; ++m)
        noise[m] = content_gauss(cfg.d_raw, content_start, rng);

    // Decoy directions: query-aligned in proportion to distractor strength,
    // norm-boosted so the query dot-product matches the cue's at the default
    // strength. At the default the resulting embedding cosine to the query
    // lands near 0.55.
    const double band =
        std::min(0.62, cfg.distractor_strength * (0.62 / 0.6));
    const double decoy_scale = kCueBase / 0.62;
    std::array<Vec, 2> decoy_dir;
    for (Vec& dir : decoy_dir) {
        const Vec& qk = q[static_cast<int>(key_mod)];
        Vec fresh = content_gauss(cfg.d_raw, content_start, rng);
        fresh -= fresh.dot(qk) * qk;  // keep the alignment band tight
        const double n = fresh.norm();
        if (n > 0.0) fresh /= n;
        dir = band * qk + std::sqrt(std::max(0.0, 1.0 - band * band)) * fresh;
    }

    ep.observations.reserve(cfg.T);
    for (int t = 1; t <= cfg.T; ++t) {
        Observation o;
        o.t = t;
        const bool is_cue = (t == cue_t);
        const bool is_query = (t == cfg.T);
        const int decoy_idx = (t == decoy_t1) ? 0 : (t == decoy_t2) ? 1 : -1;
        const bool is_decoy = decoy_idx >= 0;
        const int drawn_type = type_dist(rng);  // fixed draw schedule
        o.action_type = (is_cue || is_query || is_decoy) ? kRecallActionType : drawn_type;

        // refresh noise streams (fixed schedule, same rng draws every episode)
        noise[0] = content_gauss(cfg.d_raw, content_start, rng);
        {
            Vec drift = content_gauss(cfg.d_raw, content_start, rng);
            Vec blended = noise[1] + 0.3 * drift;
            const double n = blended.norm();
            noise[1] = (n > 0.0) ? Vec(blended / n) : blended;
        }
        {
            Vec fresh = content_gauss(cfg.d_raw, content_start, rng);
            if (t % 3 == 0) noise[2] = fresh;
        }

        const double align = cfg.distractor_strength *
                             std::min(1.0, cfg.recency_bias * static_cast<double>(t) /
                                               static_cast<double>(cfg.T));
        std::array<Vec, kNumModalities> vecs;
        for (int m = 0; m < kNumModalities; ++m) {
            const Vec extra = content_gauss(cfg.d_raw, content_start, rng);
            if (is_query) {
                vecs[m] = q[m] + 0.1 * extra;
            } else if (is_cue && m == static_cast<int>(key_mod)) {
                vecs[m] = kCueBase * q[m];
                vecs[m][answer] += kCueBump;
            } else if (is_decoy && m == static_cast<int>(key_mod)) {
                vecs[m] = decoy_scale * decoy_dir[decoy_idx];
                vecs[m][decoy_answer[decoy_idx]] += kCueBump;
            } else {
                vecs[m] = align * q[m] +
                          std::sqrt(std::max(0.0, 1.0 - align * align)) * noise[m];
            }
            add_type_signature(vecs[m], o.action_type, cfg.n_actions);
        }
        o.v = std::move(vecs[0]);
        o.x = std::move(vecs[1]);
        o.k = std::move(vecs[2]);
        ep.observations.push_back(std::move(o));
    }
    ep.expert_states = {cue_t};
    ep.reward = 0;
    return ep;
}

int correct_action(const Episode& episode, int n_actions) {
    if (episode.expert_states.empty())
        throw std::invalid_argument("correct_action: episode has no expert state");
    const int cue_t = *episode.expert_states.begin();
    const Observation& cue = episode.observations.at(cue_t - 1);
    // The key modality is the one carrying the oversized cue vector.
    const Vec* best = &cue.v;
    for (const Vec* v : {&cue.x, &cue.k})
        if (v->norm() > best->norm()) best = v;
    int arg = 0;
    for (int a = 1; a < n_actions; ++a)
        if ((*best)[a] > (*best)[arg]) arg = a;
    return arg;
}

Vec policy_log_probs(const Mlp& policy, const Vec& input) {
    Vec logits = policy.forward(input).col(0);
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return logits.array() - lse;
}

ActionSample act(const Mlp& policy, const Vec& input, std::mt19937_64& rng) {
    const Vec logp = policy_log_probs(policy, input);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng);
    int a = 0;
    for (; a < logp.size() - 1; ++a) {
        r -= std::exp(logp[a]);
        if (r <= 0.0) break;
    }
    return {a, logp[a]};
}

ActionSample act_greedy(const Mlp& policy, const Vec& input) {
    const Vec logp = policy_log_probs(policy, input);
    int a = 0;
    for (int i = 1; i < logp.size(); ++i)
        if (logp[i] > logp[a]) a = i;
    return {a, logp[a]};
}

RolloutRecord rollout(const TrainState& state, const EnvConfig& cfg, uint64_t episode_seed,
                      const RolloutOptions& opts) {
    RolloutRecord rec;
    {
        auto env_rng = make_rng(episode_seed, 0x657665ULL);
        rec.episode = generate_episode(cfg, env_rng);
    }
    rec.correct = correct_action(rec.episode, cfg.n_actions);
    auto edge_rng = make_rng(episode_seed, 0x656467ULL);
    auto act_rng = make_rng(episode_seed, 0x616374ULL);

    const int d = state.d();
    std::vector<std::unordered_set<int>> adjacency;
    std::array<std::unique_ptr<MemoryIndex>, kNumModalities> index;
    for (int m = 0; m < kNumModalities; ++m)
        index[m] = std::make_unique<MemoryIndex>(mix_seed(episode_seed) + m, opts.window,
                                                 opts.rebuild_every);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const bool learned = (opts.graph_mode == GraphMode::Learned);

    for (const Observation& obs : rec.episode.observations) {
        const int t = obs.t;
        const int base = static_cast<int>(rec.items.size());
        auto projected = project(obs, state.projections);
        for (auto& it : projected) rec.items.push_back(it);
        adjacency.resize(rec.items.size());

        // Edge decisions for the new pairs (each new item against every
        // earlier item in node order).
        std::vector<std::pair<int, int>> new_pairs;
        for (int nj = 0; nj < kNumModalities; ++nj)
            for (int i = 0; i < base + nj; ++i) new_pairs.emplace_back(i, base + nj);
        if (!new_pairs.empty()) {
            if (learned) {
                const Vec logits = pair_logits(state.predictor, rec.items, new_pairs);
                for (size_t c = 0; c < new_pairs.size(); ++c) {
                    const double p = sigmoid(logits[static_cast<int>(c)]);
                    const bool edge = opts.sample_edges ? (unif(edge_rng) < p) : (p > 0.5);
                    const auto& [i, j] = new_pairs[c];
                    rec.pairs.push_back({i, j, edge, logits[static_cast<int>(c)]});
                    if (edge) {
                        adjacency[i].insert(j);
                        adjacency[j].insert(i);
                    }
                }
            } else {
                for (const auto& [i, j] : new_pairs) {
                    bool edge = true;
                    if (opts.graph_mode == GraphMode::CosineThreshold)
                        edge = cosine(rec.items[i].e, rec.items[j].e) > opts.cosine_tau;
                    if (edge) {
                        adjacency[i].insert(j);
                        adjacency[j].insert(i);
                    }
                }
            }
        }

        for (int m = 0; m < kNumModalities; ++m) index[m]->insert(rec.items[base + m]);

        StepRecord step;
        step.query_e = Vec::Zero(d);
        for (int m = 0; m < kNumModalities; ++m) step.query_e += rec.items[base + m].e;
        step.query_e /= static_cast<double>(kNumModalities);

        if (opts.use_memory && t > 1) {
            for (int m = 0; m < kNumModalities; ++m) {
                std::vector<int> local;
                if (opts.hierarchy) {
                    auto cand = index[m]->candidates(rec.items[base + m].e, opts.beam);
                    local = std::move(cand.ids);
                    step.retrieval_node_evaluations += cand.node_evaluations;
                } else {
                    local.resize(index[m]->size());
                    for (int i = 0; i < index[m]->size(); ++i) local[i] = i;
                    step.retrieval_node_evaluations += index[m]->size();
                }
                // local id l is timestep l+1 of this modality stream
                std::vector<int> global, filtered;
                for (int l : local) {
                    const int gid = l * kNumModalities + m;
                    if (rec.items[gid].t == t) continue;  // the query itself
                    global.push_back(gid);
                    bool linked = false;
                    for (int qm = 0; qm < kNumModalities && !linked; ++qm)
                        linked = adjacency[base + qm].count(gid) > 0;
                    if (linked) filtered.push_back(gid);
                }
                // graph-filtered pool, falling back to unfiltered if empty
                step.pools[m] = filtered.empty() ? std::move(global) : std::move(filtered);
            }
        }

        if (opts.use_memory && t > 1) {
            std::array<Pool, kNumModalities> ptr_pools;
            for (int m = 0; m < kNumModalities; ++m)
                for (int gid : step.pools[m]) ptr_pools[m].push_back(&rec.items[gid]);
            step.m = fuse(step.query_e, t, ptr_pools, state.decay).m;
        } else {
            step.m = Vec::Zero(d);
        }

        step.policy_input = Vec(2 * d);
        step.policy_input << step.query_e, step.m;
        const ActionSample a = opts.sample_actions
                                   ? act(state.policy, step.policy_input, act_rng)
                                   : act_greedy(state.policy, step.policy_input);
        step.action = a.action;
        step.log_prob = a.log_prob;
        rec.steps.push_back(std::move(step));
    }

    rec.reward = (rec.steps.back().action == rec.correct) ? 1 : 0;
    rec.episode.reward = rec.reward;
    return rec;
}

}  // namespace graphmem

#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "graphmem/attention.hpp"
#include "graphmem/config.hpp"
#include "graphmem/mlp.hpp"
#include "graphmem/types.hpp"

namespace graphmem {

struct TrainState;  // learn.hpp

/// Synthetic key-recall navigation task. One planted cue step encodes the
/// correct final action in the first n_actions coordinates of its key
/// modality vector; distractors grow more similar to the final query with
/// recency, so neither pure recency nor raw similarity is optimal.
struct EnvConfig {
    int T = 30;
    int d_raw = 32;
    int n_actions = 4;
    std::string key_modality = "x";  // v | x | k | mix
    double distractor_strength = 0.6;
    double recency_bias = 0.8;

    static EnvConfig from_run_config(const RunConfig& cfg);
};

inline const std::vector<std::string>& action_type_names() {
    static const std::vector<std::string> names = {"navigate", "inspect", "recall",
                                                   "commit"};
    return names;
}
constexpr int kRecallActionType = 2;

Episode generate_episode(const EnvConfig& cfg, std::mt19937_64& rng,
                         const std::string& task_id = "");

/// Recovers the correct final action from a generated episode: the cue
/// step is the expert state, its key modality the highest-norm vector,
/// and the action the argmax of the leading n_actions block.
int correct_action(const Episode& episode, int n_actions);

struct ActionSample {
    int action = 0;
    double log_prob = 0.0;
};

/// Categorical sample from softmax(policy(input)); input is
/// concat(fused current observation, m_t).
ActionSample act(const Mlp& policy, const Vec& input, std::mt19937_64& rng);
ActionSample act_greedy(const Mlp& policy, const Vec& input);

/// Log-probabilities of all actions (for gradients and tests).
Vec policy_log_probs(const Mlp& policy, const Vec& input);

struct PairDecision {
    int i = 0, j = 0;   // global item ids, i < j in node order
    bool edge = false;  // realized decision
    double logit = 0.0;
};

struct StepRecord {
    std::array<std::vector<int>, kNumModalities> pools;  // attention pool item ids
    Vec query_e;   // fused current observation (mean over modalities)
    Vec m;         // memory vector
    Vec policy_input;
    int action = 0;
    double log_prob = 0.0;
    int retrieval_node_evaluations = 0;
};

struct RolloutRecord {
    Episode episode;
    std::vector<ProjectedItem> items;  // global list, node order
    std::vector<PairDecision> pairs;   // recorded only in learned graph mode
    std::vector<StepRecord> steps;
    int reward = 0;
    int correct = 0;  // the environment's correct final action
};

struct RolloutOptions {
    GraphMode graph_mode = GraphMode::Learned;
    double cosine_tau = 0.5;
    bool hierarchy = true;
    bool use_memory = true;       // false: m_t forced to zero
    bool sample_edges = true;     // training: Bernoulli(p); eval: p > 0.5
    bool sample_actions = true;   // eval: greedy argmax
    int window = 20;
    int rebuild_every = 10;
    int beam = 2;
};

/// Runs the full per-step pipeline (project, insert, edge decisions,
/// graph-filtered retrieval, fuse, act) over a generated episode.
RolloutRecord rollout(const TrainState& state, const EnvConfig& cfg, uint64_t episode_seed,
                      const RolloutOptions& opts);

}  // namespace graphmem

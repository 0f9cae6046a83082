#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "graphmem/attention.hpp"
#include "graphmem/config.hpp"
#include "graphmem/env.hpp"
#include "graphmem/graph.hpp"
#include "graphmem/projection.hpp"

namespace graphmem {

struct TrainState {
    PredictorParams predictor;
    DecayParams decay;
    Mlp policy;  // concat(o_fused, m_t): 2d -> 64 -> n_actions
    ProjectionParams projections;
    double ema_baseline = 0.0;
    long step = 0;
    uint64_t seed = 0;

    int d() const { return static_cast<int>(decay.Wq.rows()); }

    static TrainState init(const RunConfig& cfg);
};

/// Decoupled-weight-decay adaptive-moment optimizer. Weight decay applies
/// only where `decay_param` is set (weight matrices, not biases or decay
/// rates). Moments are keyed by parameter name.
class AdamW {
public:
    AdamW(double lr, double beta1, double beta2, double eps, double weight_decay);

    void begin_step() { ++t_; }
    long step_count() const { return t_; }
    void set_lr(double lr) { lr_ = lr; }

    void update(const std::string& key, Mat& param, const Mat& grad, bool decay_param);
    void update(const std::string& key, Vec& param, const Vec& grad, bool decay_param);
    void update(const std::string& key, Vec3& param, const Vec3& grad, bool decay_param);

private:
    struct Moments {
        Mat m, v;
    };
    void update_impl(Moments& mom, double* p, const double* g, long n, bool decay_param);

    std::map<std::string, Moments> moments_;
    double lr_, beta1_, beta2_, eps_, weight_decay_;
    long t_ = 0;
};

struct LabeledPair {
    int i = 0, j = 0;
    int label = 0;
};

/// y_ij = 1[same action type AND cos(e_i, e_j) > 0.6]. Items carry no
/// action types, so they are looked up by timestep in the episode.
std::vector<LabeledPair> edge_labels(const Episode& episode,
                                     const std::vector<ProjectedItem>& items,
                                     double cos_threshold = 0.6);

int label_for_pair(const Episode& episode, const ProjectedItem& a, const ProjectedItem& b,
                   double cos_threshold = 0.6);

struct EdgeLossResult {
    double loss = 0.0;
    Mlp grads;                 // d(loss)/d(predictor)
    Mat input_grads;           // d(loss)/d(pair inputs), for projection training
    Mat inputs;                // the pair input matrix (same column order)
};

/// Mean binary cross-entropy over the pairs; probabilities clamped to
/// [1e-7, 1-1e-7] before the log. Throws on an empty pair set.
EdgeLossResult edge_loss(const PredictorParams& params,
                         const std::vector<ProjectedItem>& items,
                         const std::vector<LabeledPair>& pairs,
                         bool want_input_grads = false);

struct PolicyGradients {
    Mlp predictor;   // phi terms
    Mlp policy;      // theta terms
    AttentionGrads attention;  // via m_t
    double loss_retrieval = 0.0;  // -R * sum log pi
    double surrogate_pg = 0.0;    // -sum log p(e_ij) * (R - b)
    double mean_reward = 0.0;
};

/// REINFORCE gradients over a batch of rollouts. Edge decisions must have
/// been sampled during rollout; phi accumulates grad log p(e_ij) (R - b),
/// theta accumulates -R grad log pi, and the m_t path propagates into
/// attention parameters. The EMA baseline is read before and updated
/// after each episode in batch order.
PolicyGradients reinforce_grads(const std::vector<RolloutRecord>& batch, TrainState& state,
                                double gamma_baseline, bool update_baseline = true);

/// Norm of the per-episode phi gradient for a fixed baseline value.
double phi_grad_norm(const RolloutRecord& record, const TrainState& state, double baseline);

struct LossBreakdown {
    double retrieval = 0.0;
    double edge = 0.0;
    double decay = 0.0;
    double total = 0.0;  // retrieval + w_edge * edge + w_decay * decay
};

struct TrainResult {
    TrainState state;
    std::string metrics_csv;
    double stage1_initial_loss = 0.0;  // edge loss on the held-out probe, before training
    double stage1_final_loss = 0.0;
};

/// Two-stage schedule: supervised edge pre-training, then combined-loss
/// fine-tuning with REINFORCE rollouts.
TrainResult train(const RunConfig& cfg);

/// Max relative error between the analytic gradient and central finite
/// differences over `samples` randomly chosen entries of `param`.
double grad_check(const std::function<double()>& loss, double* param_data, long param_size,
                  const double* analytic_data, int samples, std::mt19937_64& rng,
                  double h = 1e-5);

double grad_check(const std::function<double()>& loss, Mat& param, const Mat& analytic,
                  int samples, std::mt19937_64& rng, double h = 1e-5);
double grad_check(const std::function<double()>& loss, Vec& param, const Vec& analytic,
                  int samples, std::mt19937_64& rng, double h = 1e-5);

// Checkpoints -----------------------------------------------------------

constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const TrainState& state, const RunConfig& cfg, const std::string& path);
std::pair<TrainState, RunConfig> load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const TrainState& state, const RunConfig& cfg);
std::pair<TrainState, RunConfig> checkpoint_from_string(const std::string& text);

}  // namespace graphmem

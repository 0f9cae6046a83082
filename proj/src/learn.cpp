#include "graphmem/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "graphmem/index.hpp"
#include "graphmem/rng.hpp"
#include "json.hpp"

namespace graphmem {

using nlohmann::json;

TrainState TrainState::init(const RunConfig& cfg) {
    TrainState s;
    s.seed = cfg.seed;
    auto pred_rng = make_rng(cfg.seed, 0x70726564ULL);
    s.predictor = PredictorParams::make(cfg.d, pred_rng);
    auto attn_rng = make_rng(cfg.seed, 0x6174746eULL);
    s.decay = DecayParams::make(cfg.d, attn_rng);
    s.decay.tau = cfg.tau;
    switch (cfg.decay_mode) {
        case DecayMode::Learned:
            s.decay.lambda = Vec3(cfg.lambda_init[0], cfg.lambda_init[1], cfg.lambda_init[2]);
            break;
        case DecayMode::Uniform:
            s.decay.lambda = Vec3::Constant(0.25);
            break;
        case DecayMode::None:
            s.decay.lambda = Vec3::Zero();
            break;
    }
    auto pol_rng = make_rng(cfg.seed, 0x706f6cULL);
    s.policy = Mlp::make({2 * cfg.d, 64, cfg.n_actions}, pol_rng);
    s.projections = ProjectionParams::identity(cfg.d_raw, cfg.d);
    return s;
}

// AdamW ----------------------------------------------------------------

AdamW::AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::update_impl(Moments& mom, double* p, const double* g, long n, bool decay_param) {
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    double* m = mom.m.data();
    double* v = mom.v.data();
    for (long i = 0; i < n; ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_));
        if (decay_param) p[i] -= lr_ * weight_decay_ * p[i];
    }
}

void AdamW::update(const std::string& key, Mat& param, const Mat& grad, bool decay_param) {
    auto [it, inserted] = moments_.try_emplace(key);
    if (inserted) {
        it->second.m = Mat::Zero(param.rows(), param.cols());
        it->second.v = Mat::Zero(param.rows(), param.cols());
    }
    update_impl(it->second, param.data(), grad.data(), param.size(), decay_param);
}

void AdamW::update(const std::string& key, Vec& param, const Vec& grad, bool decay_param) {
    auto [it, inserted] = moments_.try_emplace(key);
    if (inserted) {
        it->second.m = Mat::Zero(param.size(), 1);
        it->second.v = Mat::Zero(param.size(), 1);
    }
    update_impl(it->second, param.data(), grad.data(), param.size(), decay_param);
}

void AdamW::update(const std::string& key, Vec3& param, const Vec3& grad, bool decay_param) {
    auto [it, inserted] = moments_.try_emplace(key);
    if (inserted) {
        it->second.m = Mat::Zero(3, 1);
        it->second.v = Mat::Zero(3, 1);
    }
    update_impl(it->second, param.data(), grad.data(), 3, decay_param);
}

// Edge labels and loss --------------------------------------------------

int label_for_pair(const Episode& episode, const ProjectedItem& a, const ProjectedItem& b,
                   double cos_threshold) {
    const int type_a = episode.observations.at(a.t - 1).action_type;
    const int type_b = episode.observations.at(b.t - 1).action_type;
    if (type_a != type_b) return 0;
    return cosine(a.e, b.e) > cos_threshold ? 1 : 0;
}

std::vector<LabeledPair> edge_labels(const Episode& episode,
                                     const std::vector<ProjectedItem>& items,
                                     double cos_threshold) {
    std::vector<LabeledPair> out;
    const int n = static_cast<int>(items.size());
    out.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            out.push_back({i, j, label_for_pair(episode, items[i], items[j], cos_threshold)});
    return out;
}

namespace {

constexpr double kProbClamp = 1e-7;

double bce(double p, int y) {
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return y ? -std::log(pc) : -std::log(1.0 - pc);
}

// log p(decision) for a Bernoulli with the given logit, stable form.
double log_bernoulli(double logit, bool decision) {
    // log sigma(z) = -softplus(-z); log(1 - sigma(z)) = -softplus(z)
    const double z = decision ? -logit : logit;
    return -(z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
}

}  // namespace

EdgeLossResult edge_loss(const PredictorParams& params,
                         const std::vector<ProjectedItem>& items,
                         const std::vector<LabeledPair>& pairs, bool want_input_grads) {
    if (pairs.empty()) throw std::invalid_argument("edge_loss: empty pair set");
    EdgeLossResult r;
    r.grads = Mlp::zeros_like(params.net);
    std::vector<std::pair<int, int>> idx;
    idx.reserve(pairs.size());
    for (const auto& p : pairs) idx.emplace_back(p.i, p.j);
    Mlp::Cache cache;
    const Vec logits = pair_logits(params, items, idx, &cache, &r.inputs);
    const int n = static_cast<int>(pairs.size());
    Mat dY(1, n);
    for (int c = 0; c < n; ++c) {
        const double p = sigmoid(logits[c]);
        r.loss += bce(p, pairs[c].label);
        dY(0, c) = (p - static_cast<double>(pairs[c].label)) / static_cast<double>(n);
    }
    r.loss /= static_cast<double>(n);
    Mat dX;
    params.net.backward(r.inputs, cache, dY, r.grads, want_input_grads ? &dX : nullptr);
    if (want_input_grads) r.input_grads = std::move(dX);
    return r;
}

// REINFORCE -------------------------------------------------------------

namespace {

// phi gradients plus surrogate loss for one episode at a fixed baseline.
// Optionally folds in w_edge * BCE(labels) over the same pair set so the
// batched backward runs once.
void episode_phi_backward(const RolloutRecord& rec, const TrainState& state,
                          double advantage, double w_edge, Mlp& predictor_grads,
                          double* surrogate, double* edge_loss_out) {
    if (rec.pairs.empty()) return;
    std::vector<std::pair<int, int>> idx;
    idx.reserve(rec.pairs.size());
    for (const auto& p : rec.pairs) idx.emplace_back(p.i, p.j);
    Mlp::Cache cache;
    Mat inputs;
    const Vec logits = pair_logits(state.predictor, rec.items, idx, &cache, &inputs);
    const int n = static_cast<int>(rec.pairs.size());
    Mat dY(1, n);
    double edge_sum = 0.0;
    for (int c = 0; c < n; ++c) {
        const double z = logits[c];
        const double p = sigmoid(z);
        const double e = rec.pairs[c].edge ? 1.0 : 0.0;
        if (surrogate) *surrogate += -log_bernoulli(z, rec.pairs[c].edge) * advantage;
        // d/dz of -log p(decision) * advantage
        double dz = -(e - p) * advantage;
        if (w_edge > 0.0) {
            const int y = label_for_pair(rec.episode, rec.items[rec.pairs[c].i],
                                         rec.items[rec.pairs[c].j]);
            edge_sum += bce(p, y);
            dz += w_edge * (p - static_cast<double>(y)) / static_cast<double>(n);
        }
        dY(0, c) = dz;
    }
    if (edge_loss_out) *edge_loss_out = edge_sum / static_cast<double>(n);
    state.predictor.net.backward(inputs, cache, dY, predictor_grads, nullptr);
}

void episode_theta_backward(const RolloutRecord& rec, const TrainState& state,
                            double reward, Mlp& policy_grads, AttentionGrads& attn_grads,
                            double* loss_retrieval) {
    const int d = state.d();
    const int T = static_cast<int>(rec.steps.size());
    const int in_dim = state.policy.in_dim();
    Mat X(in_dim, T);
    for (int t = 0; t < T; ++t) X.col(t) = rec.steps[t].policy_input;
    Mlp::Cache cache;
    const Mat logits = state.policy.forward(X, &cache);
    Mat dY(logits.rows(), T);
    for (int t = 0; t < T; ++t) {
        Vec col = logits.col(t);
        const double mx = col.maxCoeff();
        Vec p = (col.array() - mx).exp();
        p /= p.sum();
        if (loss_retrieval)
            *loss_retrieval += -reward * (std::log(std::max(p[rec.steps[t].action], 1e-300)));
        // d/dlogits of -R log pi(a_t)
        p[rec.steps[t].action] -= 1.0;
        dY.col(t) = reward * p;
    }
    Mat dX;
    state.policy.backward(X, cache, dY, policy_grads, &dX);

    // memory-vector path into the attention parameters
    for (int t = 0; t < T; ++t) {
        const StepRecord& step = rec.steps[t];
        bool any = false;
        for (const auto& pool : step.pools) any = any || !pool.empty();
        if (!any) continue;
        std::array<Pool, kNumModalities> ptr_pools;
        for (int m = 0; m < kNumModalities; ++m)
            for (int gid : step.pools[m]) ptr_pools[m].push_back(&rec.items[gid]);
        FuseCache fc;
        fuse(step.query_e, rec.episode.observations[t].t, ptr_pools, state.decay, &fc);
        const Vec g = dX.col(t).tail(d);
        fuse_backward(g, fc, state.decay, attn_grads, nullptr);
    }
}

}  // namespace

PolicyGradients reinforce_grads(const std::vector<RolloutRecord>& batch, TrainState& state,
                                double gamma_baseline, bool update_baseline) {
    PolicyGradients g;
    g.predictor = Mlp::zeros_like(state.predictor.net);
    g.policy = Mlp::zeros_like(state.policy);
    g.attention = AttentionGrads::zeros(state.d());
    double reward_sum = 0.0;
    for (const RolloutRecord& rec : batch) {
        const double b = state.ema_baseline;
        const double R = static_cast<double>(rec.reward);
        episode_phi_backward(rec, state, R - b, 0.0, g.predictor, &g.surrogate_pg, nullptr);
        episode_theta_backward(rec, state, R, g.policy, g.attention, &g.loss_retrieval);
        if (update_baseline)
            state.ema_baseline = gamma_baseline * b + (1.0 - gamma_baseline) * R;
        reward_sum += R;
    }
    g.mean_reward = batch.empty() ? 0.0 : reward_sum / static_cast<double>(batch.size());
    return g;
}

double phi_grad_norm(const RolloutRecord& record, const TrainState& state, double baseline) {
    Mlp grads = Mlp::zeros_like(state.predictor.net);
    const double R = static_cast<double>(record.reward);
    episode_phi_backward(record, state, R - baseline, 0.0, grads, nullptr, nullptr);
    return std::sqrt(grads.squared_norm());
}

// Training --------------------------------------------------------------

namespace {

struct MetricsLog {
    std::ostringstream out;

    explicit MetricsLog(const RunConfig& cfg) {
        out << "# format_version=1\n";
        out << "# config=" << cfg.to_json_string() << "\n";
        out << "step,stage,loss_total,loss_edge,loss_decay,loss_retrieval,success_rate,"
               "lambda_v,lambda_x,lambda_k,baseline\n";
    }

    void row(long step, int stage, double total, double edge, double decay, double retrieval,
             double success, const Vec3& lambda, double baseline) {
        char buf[512];
        std::snprintf(buf, sizeof(buf),
                      "%ld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", step,
                      stage, total, edge, decay, retrieval, success, lambda[0], lambda[1],
                      lambda[2], baseline);
        out << buf;
    }
};

struct Stage1Episode {
    Episode episode;
    std::vector<ProjectedItem> items;
    std::vector<std::pair<int, int>> positives;
};

void find_positives(Stage1Episode& ep) {
    ep.positives.clear();
    const int n = static_cast<int>(ep.items.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (label_for_pair(ep.episode, ep.items[i], ep.items[j]) == 1)
                ep.positives.emplace_back(i, j);
}

// Positive pairs are rare (a few percent), so training batches oversample
// them; the probe batches stay at the natural rate (positive_fraction 0).
std::vector<LabeledPair> sample_pairs(const Stage1Episode& ep, int count,
                                      std::mt19937_64& rng,
                                      double positive_fraction = 0.0) {
    const int n = static_cast<int>(ep.items.size());
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<LabeledPair> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        if (!ep.positives.empty() && coin(rng) < positive_fraction) {
            std::uniform_int_distribution<int> ppick(
                0, static_cast<int>(ep.positives.size()) - 1);
            const auto& [i, j] = ep.positives[ppick(rng)];
            out.push_back({i, j, 1});
            continue;
        }
        int i = pick(rng);
        int j = pick(rng);
        if (i == j) continue;
        if (i > j) std::swap(i, j);
        out.push_back({i, j, label_for_pair(ep.episode, ep.items[i], ep.items[j])});
    }
    return out;
}

// Accumulates projection-matrix gradients from the predictor's input
// gradients for the given pair columns (train_projections path).
void accumulate_projection_grads(const Episode& episode,
                                 const std::vector<ProjectedItem>& items,
                                 const std::vector<LabeledPair>& pairs,
                                 const Mat& input_grads, int d,
                                 std::array<Mat, kNumModalities>& proj_grads) {
    for (size_t c = 0; c < pairs.size(); ++c) {
        const ProjectedItem& a = items[pairs[c].i];
        const ProjectedItem& b = items[pairs[c].j];
        Vec de_a = input_grads.col(static_cast<int>(c)).head(d);
        Vec de_b = input_grads.col(static_cast<int>(c)).segment(d, d);
        const double dcos = input_grads.col(static_cast<int>(c))(2 * d + 1);
        if (dcos != 0.0) {
            Vec ca, cb;
            cosine_grad(a.e, b.e, ca, cb);
            de_a += dcos * ca;
            de_b += dcos * cb;
        }
        const Vec& raw_a = modality_vec(episode.observations[a.t - 1], a.m);
        const Vec& raw_b = modality_vec(episode.observations[b.t - 1], b.m);
        proj_grads[static_cast<int>(a.m)].noalias() += de_a * raw_a.transpose();
        proj_grads[static_cast<int>(b.m)].noalias() += de_b * raw_b.transpose();
    }
}

}  // namespace

TrainResult train(const RunConfig& cfg) {
    TrainState state = TrainState::init(cfg);
    MetricsLog log(cfg);
    AdamW opt(cfg.lr_stage1, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay);
    const EnvConfig env = EnvConfig::from_run_config(cfg);
    const int d = cfg.d;

    // Stage-1 episode pool and a fixed held-out probe batch.
    std::vector<Stage1Episode> pool(cfg.stage1_episode_pool);
    for (int i = 0; i < cfg.stage1_episode_pool; ++i) {
        auto rng = make_rng(cfg.seed, 0x733165ULL + static_cast<uint64_t>(i));
        pool[i].episode = generate_episode(env, rng, "s1-" + std::to_string(i));
        pool[i].items = project_episode(pool[i].episode, state.projections);
        find_positives(pool[i]);
    }
    std::vector<Stage1Episode> probe(8);
    std::vector<std::vector<LabeledPair>> probe_pairs(probe.size());
    {
        auto prng = make_rng(cfg.seed, 0x70726f6265ULL);
        for (size_t i = 0; i < probe.size(); ++i) {
            auto rng = make_rng(cfg.seed, 0x70623100ULL + i);
            probe[i].episode = generate_episode(env, rng, "probe-" + std::to_string(i));
            probe[i].items = project_episode(probe[i].episode, state.projections);
            probe_pairs[i] = sample_pairs(probe[i], 64, prng);
        }
    }
    auto probe_loss = [&]() {
        double total = 0.0;
        for (size_t i = 0; i < probe.size(); ++i)
            total += edge_loss(state.predictor, probe[i].items, probe_pairs[i]).loss;
        return total / static_cast<double>(probe.size());
    };

    TrainResult result;
    result.stage1_initial_loss = probe_loss();

    // Stage 1: supervised edge pre-training.
    auto batch_rng = make_rng(cfg.seed, 0x733162ULL);
    for (int step = 0; step < cfg.steps_stage1; ++step) {
        Stage1Episode& ep = pool[step % pool.size()];
        if (cfg.train_projections) {
            ep.items = project_episode(ep.episode, state.projections);
            find_positives(ep);
        }
        const auto pairs = sample_pairs(ep, cfg.batch_pairs, batch_rng, 0.25);
        EdgeLossResult r = edge_loss(state.predictor, ep.items, pairs, cfg.train_projections);
        bool finite = r.grads.all_finite();
        std::array<Mat, kNumModalities> proj_grads;
        if (cfg.train_projections && finite) {
            for (auto& g : proj_grads) g = Mat::Zero(d, cfg.d_raw);
            accumulate_projection_grads(ep.episode, ep.items, pairs, r.input_grads, d,
                                        proj_grads);
            for (const auto& g : proj_grads) finite = finite && g.allFinite();
        }
        if (finite) {
            opt.begin_step();
            for (int l = 0; l < state.predictor.net.num_layers(); ++l) {
                opt.update("pred_W" + std::to_string(l), state.predictor.net.W[l],
                           r.grads.W[l], true);
                opt.update("pred_b" + std::to_string(l), state.predictor.net.b[l],
                           r.grads.b[l], false);
            }
            if (cfg.train_projections)
                for (int m = 0; m < kNumModalities; ++m)
                    opt.update("proj_" + std::to_string(m), state.projections.W[m],
                               proj_grads[m], true);
        }
        ++state.step;
        log.row(state.step, 1, r.loss, r.loss, 0.0, 0.0, 0.0, state.decay.lambda,
                state.ema_baseline);
    }
    result.stage1_final_loss = probe_loss();

    // Stage 2: combined loss with REINFORCE rollouts.
    if (cfg.stage2 && cfg.steps_stage2 > 0) {
        opt.set_lr(cfg.lr_stage2);
        RolloutOptions ropts;
        ropts.graph_mode = cfg.graph_mode;
        ropts.cosine_tau = cfg.graph_cosine_tau;
        ropts.hierarchy = cfg.hierarchy;
        ropts.sample_edges = (cfg.graph_mode == GraphMode::Learned);
        ropts.sample_actions = true;
        ropts.window = cfg.window;
        ropts.rebuild_every = cfg.rebuild_every;
        ropts.beam = cfg.beam;

        for (int step = 0; step < cfg.steps_stage2; ++step) {
            const int B = cfg.batch_episodes;
            std::vector<RolloutRecord> batch(B);
            auto run_one = [&](int b) {
                const uint64_t ep_seed =
                    mix_seed(cfg.seed) + 0x73320000ULL +
                    static_cast<uint64_t>(step) * static_cast<uint64_t>(B) +
                    static_cast<uint64_t>(b);
                batch[b] = rollout(state, env, ep_seed, ropts);
            };
            if (cfg.workers > 1 && B > 1) {
                std::vector<std::thread> threads;
                for (int b = 0; b < B; ++b) threads.emplace_back(run_one, b);
                for (auto& th : threads) th.join();
            } else {
                for (int b = 0; b < B; ++b) run_one(b);
            }

            PolicyGradients g;
            g.predictor = Mlp::zeros_like(state.predictor.net);
            g.policy = Mlp::zeros_like(state.policy);
            g.attention = AttentionGrads::zeros(d);
            double edge_loss_sum = 0.0;
            double reward_sum = 0.0;
            for (const RolloutRecord& rec : batch) {
                const double b0 = state.ema_baseline;
                const double R = static_cast<double>(rec.reward);
                double ep_edge = 0.0;
                episode_phi_backward(rec, state, R - b0, cfg.w_edge, g.predictor,
                                     &g.surrogate_pg, &ep_edge);
                episode_theta_backward(rec, state, R, g.policy, g.attention,
                                       &g.loss_retrieval);
                state.ema_baseline =
                    cfg.gamma_baseline * b0 + (1.0 - cfg.gamma_baseline) * R;
                edge_loss_sum += ep_edge;
                reward_sum += R;
            }
            const double inv_b = 1.0 / static_cast<double>(B);
            const double loss_edge = edge_loss_sum * inv_b;
            const double loss_decay =
                (cfg.decay_mode == DecayMode::Learned) ? decay_loss(state.decay) : 0.0;
            const double loss_retrieval = g.loss_retrieval * inv_b;
            const double success = reward_sum * inv_b;

            Vec3 lambda_grad = g.attention.lambda * inv_b;
            if (cfg.decay_mode == DecayMode::Learned)
                lambda_grad += cfg.w_decay * decay_loss_grad(state.decay);

            const bool finite = g.predictor.all_finite() && g.policy.all_finite() &&
                                g.attention.all_finite() && lambda_grad.allFinite();
            if (finite) {
                opt.begin_step();
                opt.set_lr(cfg.lr_stage2_predictor);
                for (int l = 0; l < state.predictor.net.num_layers(); ++l) {
                    opt.update("pred_W" + std::to_string(l), state.predictor.net.W[l],
                               Mat(g.predictor.W[l] * inv_b), true);
                    opt.update("pred_b" + std::to_string(l), state.predictor.net.b[l],
                               Vec(g.predictor.b[l] * inv_b), false);
                }
                opt.set_lr(cfg.lr_stage2);
                for (int l = 0; l < state.policy.num_layers(); ++l) {
                    opt.update("pol_W" + std::to_string(l), state.policy.W[l],
                               Mat(g.policy.W[l] * inv_b), true);
                    opt.update("pol_b" + std::to_string(l), state.policy.b[l],
                               Vec(g.policy.b[l] * inv_b), false);
                }
                opt.update("attn_Wq", state.decay.Wq, Mat(g.attention.Wq * inv_b), true);
                opt.update("attn_Wk", state.decay.Wk, Mat(g.attention.Wk * inv_b), true);
                opt.update("attn_beta", state.decay.beta_logits,
                           Vec3(g.attention.beta_logits * inv_b), false);
                if (cfg.decay_mode == DecayMode::Learned) {
                    opt.update("attn_lambda", state.decay.lambda, lambda_grad, false);
                    state.decay.lambda =
                        state.decay.lambda.cwiseMax(0.0).cwiseMin(5.0);
                }
            }
            ++state.step;
            const double total = loss_retrieval + cfg.w_edge * loss_edge +
                                 cfg.w_decay * loss_decay;
            log.row(state.step, 2, total, loss_edge, loss_decay, loss_retrieval, success,
                    state.decay.lambda, state.ema_baseline);
        }
    }

    result.state = std::move(state);
    result.metrics_csv = log.out.str();
    return result;
}

// Gradient checking -----------------------------------------------------

double grad_check(const std::function<double()>& loss, double* param_data, long param_size,
                  const double* analytic_data, int samples, std::mt19937_64& rng, double h) {
    std::uniform_int_distribution<long> pick(0, param_size - 1);
    double worst = 0.0;
    const int count = (samples >= param_size) ? static_cast<int>(param_size) : samples;
    for (int s = 0; s < count; ++s) {
        const long i = (samples >= param_size) ? s : pick(rng);
        const double saved = param_data[i];
        param_data[i] = saved + h;
        const double fp = loss();
        param_data[i] = saved - h;
        const double fm = loss();
        param_data[i] = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double a = analytic_data[i];
        const double denom = std::max({std::abs(a), std::abs(fd), 1e-4});
        worst = std::max(worst, std::abs(a - fd) / denom);
    }
    return worst;
}

double grad_check(const std::function<double()>& loss, Mat& param, const Mat& analytic,
                  int samples, std::mt19937_64& rng, double h) {
    return grad_check(loss, param.data(), param.size(), analytic.data(), samples, rng, h);
}

double grad_check(const std::function<double()>& loss, Vec& param, const Vec& analytic,
                  int samples, std::mt19937_64& rng, double h) {
    return grad_check(loss, param.data(), param.size(), analytic.data(), samples, rng, h);
}

// Checkpoints -----------------------------------------------------------

namespace {

json mat_to_json(const Mat& m) {
    json data = json::array();
    for (int j = 0; j < m.cols(); ++j)
        for (int i = 0; i < m.rows(); ++i) data.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat mat_from_json(const json& j) {
    const long rows = j.at("rows").get<long>();
    const long cols = j.at("cols").get<long>();
    const auto& data = j.at("data");
    if (static_cast<long>(data.size()) != rows * cols)
        throw std::runtime_error("checkpoint: tensor shape mismatch");
    Mat m(rows, cols);
    long idx = 0;
    for (long c = 0; c < cols; ++c)
        for (long r = 0; r < rows; ++r) m(r, c) = data[idx++].get<double>();
    return m;
}

}  // namespace

std::string checkpoint_to_string(const TrainState& state, const RunConfig& cfg) {
    json tensors;
    for (int l = 0; l < state.predictor.net.num_layers(); ++l) {
        tensors["pred_W" + std::to_string(l)] = mat_to_json(state.predictor.net.W[l]);
        tensors["pred_b" + std::to_string(l)] = mat_to_json(state.predictor.net.b[l]);
    }
    for (int l = 0; l < state.policy.num_layers(); ++l) {
        tensors["pol_W" + std::to_string(l)] = mat_to_json(state.policy.W[l]);
        tensors["pol_b" + std::to_string(l)] = mat_to_json(state.policy.b[l]);
    }
    tensors["attn_Wq"] = mat_to_json(state.decay.Wq);
    tensors["attn_Wk"] = mat_to_json(state.decay.Wk);
    tensors["attn_lambda"] = mat_to_json(state.decay.lambda);
    tensors["attn_lambda_gt"] = mat_to_json(state.decay.lambda_gt);
    tensors["attn_beta_logits"] = mat_to_json(state.decay.beta_logits);
    for (int m = 0; m < kNumModalities; ++m)
        tensors["proj_" + std::to_string(m)] = mat_to_json(state.projections.W[m]);

    json j = {{"format_version", kCheckpointFormatVersion},
              {"config", json::parse(cfg.to_json_string())},
              {"step", state.step},
              {"ema_baseline", state.ema_baseline},
              {"seed", state.seed},
              {"tau", state.decay.tau},
              {"tensors", tensors}};
    return j.dump();
}

std::pair<TrainState, RunConfig> checkpoint_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("checkpoint parse error: ") + e.what());
    }
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint format_version " + std::to_string(version) +
                                 " not supported");
    RunConfig cfg = RunConfig::from_json_string(j.at("config").dump());
    TrainState state = TrainState::init(cfg);
    const json& tensors = j.at("tensors");
    for (int l = 0; l < state.predictor.net.num_layers(); ++l) {
        state.predictor.net.W[l] = mat_from_json(tensors.at("pred_W" + std::to_string(l)));
        state.predictor.net.b[l] =
            mat_from_json(tensors.at("pred_b" + std::to_string(l))).col(0);
    }
    for (int l = 0; l < state.policy.num_layers(); ++l) {
        state.policy.W[l] = mat_from_json(tensors.at("pol_W" + std::to_string(l)));
        state.policy.b[l] = mat_from_json(tensors.at("pol_b" + std::to_string(l))).col(0);
    }
    state.decay.Wq = mat_from_json(tensors.at("attn_Wq"));
    state.decay.Wk = mat_from_json(tensors.at("attn_Wk"));
    state.decay.lambda = mat_from_json(tensors.at("attn_lambda")).col(0);
    state.decay.lambda_gt = mat_from_json(tensors.at("attn_lambda_gt")).col(0);
    state.decay.beta_logits = mat_from_json(tensors.at("attn_beta_logits")).col(0);
    state.decay.tau = j.at("tau").get<double>();
    for (int m = 0; m < kNumModalities; ++m)
        state.projections.W[m] = mat_from_json(tensors.at("proj_" + std::to_string(m)));
    state.step = j.at("step").get<long>();
    state.ema_baseline = j.at("ema_baseline").get<double>();
    state.seed = j.at("seed").get<uint64_t>();
    return {std::move(state), std::move(cfg)};
}

void save_checkpoint(const TrainState& state, const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << checkpoint_to_string(state, cfg) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

std::pair<TrainState, RunConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_string(buf.str());
}

}  // namespace graphmem

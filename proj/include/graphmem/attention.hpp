#pragma once

#include <array>
#include <random>
#include <vector>

#include "graphmem/types.hpp"

namespace graphmem {

/// Ground-truth decay rates used by the decay regularizer.
inline Vec3 default_lambda_gt() { return Vec3(0.47, 0.11, 0.23); }

struct DecayParams {
    Vec3 lambda = default_lambda_gt();  // per-modality decay, clamped to [0, 5]
    Vec3 lambda_gt = default_lambda_gt();
    Vec3 beta_logits = Vec3::Zero();
    double tau = 0.1;
    Mat Wq, Wk;  // d x d attention projections

    Vec3 beta() const;  // softmax(beta_logits)

    static DecayParams make(int d, std::mt19937_64& rng);
};

struct MemoryVector {
    Vec m;
    // Per-modality attention weights over the corresponding pool (audit).
    std::array<Vec, kNumModalities> contributing_weights;
};

using Pool = std::vector<const ProjectedItem*>;

/// Temporally-weighted attention over one modality pool:
///   alpha_i ∝ exp(s_i / tau) * exp(-lambda_m * dt_i),
/// s_i = (Wq q)ᵀ(Wk e_i)/sqrt(d), dt_i = query_t - t_i. Log-space with
/// max subtraction. Empty pool yields an empty weight vector.
Vec attention_scores(const Vec& query_e, int query_t, const Pool& pool, Modality m,
                     const DecayParams& params);

struct FuseCache {
    Vec query_e;
    int query_t = 0;
    std::array<Pool, kNumModalities> pools;
    std::array<Vec, kNumModalities> alpha;
    std::array<Vec, kNumModalities> pooled;  // c_m = sum_i alpha_i e_i
};

/// m_t = sum_m beta_m sum_i alpha_i^m e_i^m. Empty pools contribute zero;
/// beta mass is not renormalized over nonempty modalities.
MemoryVector fuse(const Vec& query_e, int query_t,
                  const std::array<Pool, kNumModalities>& pools, const DecayParams& params,
                  FuseCache* cache = nullptr);

struct AttentionGrads {
    Vec3 lambda = Vec3::Zero();
    Vec3 beta_logits = Vec3::Zero();
    Mat Wq, Wk;

    static AttentionGrads zeros(int d);
    bool all_finite() const;
};

/// Accumulates d(loss)/d(params) given g = d(loss)/d(m_t). If d_query is
/// non-null, also accumulates the gradient w.r.t. the query embedding.
void fuse_backward(const Vec& g, const FuseCache& cache, const DecayParams& params,
                   AttentionGrads& grads, Vec* d_query = nullptr);

/// sum_m (lambda_m - lambda_m_gt)^2
double decay_loss(const DecayParams& params);
Vec3 decay_loss_grad(const DecayParams& params);

}  // namespace graphmem

#include "graphmem/attention.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace graphmem {

Vec3 DecayParams::beta() const {
    const double mx = beta_logits.maxCoeff();
    Vec3 e = (beta_logits.array() - mx).exp();
    return e / e.sum();
}

DecayParams DecayParams::make(int d, std::mt19937_64& rng) {
    DecayParams p;
    const double bound = std::sqrt(6.0 / (2 * d));
    std::uniform_real_distribution<double> dist(-bound, bound);
    p.Wq = Mat(d, d);
    p.Wk = Mat(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) p.Wq(i, j) = dist(rng);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) p.Wk(i, j) = dist(rng);
    return p;
}

namespace {

// Logits z_i = s_i/tau - lambda_m * dt_i, softmaxed in log space.
Vec pool_alpha(const Vec& query_e, int query_t, const Pool& pool, double lambda_m,
               const DecayParams& params) {
    const int n = static_cast<int>(pool.size());
    if (n == 0) return Vec();
    if (params.tau <= 0.0) throw std::invalid_argument("attention: tau must be > 0");
    const int d = static_cast<int>(query_e.size());
    const Vec qh = params.Wq * query_e;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Vec z(n);
    for (int i = 0; i < n; ++i) {
        const double s = qh.dot(params.Wk * pool[i]->e) * inv_sqrt_d;
        const double dt = static_cast<double>(query_t - pool[i]->t);
        z[i] = s / params.tau - lambda_m * dt;
    }
    const double mx = z.maxCoeff();
    Vec a = (z.array() - mx).exp();
    return a / a.sum();
}

}  // namespace

Vec attention_scores(const Vec& query_e, int query_t, const Pool& pool, Modality m,
                     const DecayParams& params) {
    return pool_alpha(query_e, query_t, pool, params.lambda[static_cast<int>(m)], params);
}

MemoryVector fuse(const Vec& query_e, int query_t,
                  const std::array<Pool, kNumModalities>& pools, const DecayParams& params,
                  FuseCache* cache) {
    const int d = static_cast<int>(query_e.size());
    MemoryVector out;
    out.m = Vec::Zero(d);
    const Vec3 beta = params.beta();
    if (cache) {
        cache->query_e = query_e;
        cache->query_t = query_t;
        cache->pools = pools;
    }
    for (int m = 0; m < kNumModalities; ++m) {
        const Vec alpha = pool_alpha(query_e, query_t, pools[m], params.lambda[m], params);
        Vec pooled = Vec::Zero(d);
        for (int i = 0; i < alpha.size(); ++i) pooled += alpha[i] * pools[m][i]->e;
        out.m += beta[m] * pooled;
        out.contributing_weights[m] = alpha;
        if (cache) {
            cache->alpha[m] = alpha;
            cache->pooled[m] = pooled;
        }
    }
    return out;
}

AttentionGrads AttentionGrads::zeros(int d) {
    AttentionGrads g;
    g.Wq = Mat::Zero(d, d);
    g.Wk = Mat::Zero(d, d);
    return g;
}

bool AttentionGrads::all_finite() const {
    return lambda.allFinite() && beta_logits.allFinite() && Wq.allFinite() &&
           Wk.allFinite();
}

void fuse_backward(const Vec& g, const FuseCache& cache, const DecayParams& params,
                   AttentionGrads& grads, Vec* d_query) {
    const int d = static_cast<int>(cache.query_e.size());
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    const Vec3 beta = params.beta();
    const Vec qh = params.Wq * cache.query_e;

    Vec3 d_beta = Vec3::Zero();
    for (int m = 0; m < kNumModalities; ++m) {
        const Pool& pool = cache.pools[m];
        const int n = static_cast<int>(pool.size());
        if (n == 0) continue;
        d_beta[m] = g.dot(cache.pooled[m]);
        const Vec& alpha = cache.alpha[m];

        // d(loss)/d(alpha_i), then through the softmax.
        Vec d_alpha(n);
        for (int i = 0; i < n; ++i) d_alpha[i] = beta[m] * g.dot(pool[i]->e);
        const double dot = alpha.dot(d_alpha);
        Vec dz = alpha.cwiseProduct((d_alpha.array() - dot).matrix());

        Vec ds_sum_e = Vec::Zero(d);       // sum_i ds_i e_i
        Vec ds_sum_kh = Vec::Zero(d);      // sum_i ds_i (Wk e_i)
        for (int i = 0; i < n; ++i) {
            const double dt = static_cast<double>(cache.query_t - pool[i]->t);
            grads.lambda[m] += dz[i] * (-dt);
            const double ds = dz[i] / params.tau * inv_sqrt_d;
            ds_sum_e += ds * pool[i]->e;
            ds_sum_kh += ds * (params.Wk * pool[i]->e);
        }
        grads.Wq.noalias() += ds_sum_kh * cache.query_e.transpose();
        grads.Wk.noalias() += qh * ds_sum_e.transpose();
        if (d_query) *d_query += params.Wq.transpose() * ds_sum_kh;
    }

    // beta_logits through softmax.
    const double bdot = beta.dot(d_beta);
    for (int m = 0; m < kNumModalities; ++m)
        grads.beta_logits[m] += beta[m] * (d_beta[m] - bdot);
}

double decay_loss(const DecayParams& params) {
    return (params.lambda - params.lambda_gt).squaredNorm();
}

Vec3 decay_loss_grad(const DecayParams& params) {
    return 2.0 * (params.lambda - params.lambda_gt);
}

}  // namespace graphmem

#include "doctest.h"

#include <cmath>

#include "graphmem/attention.hpp"
#include "graphmem/learn.hpp"
#include "graphmem/rng.hpp"

using namespace graphmem;

namespace {

Vec unit(int d, int axis) {
    Vec v = Vec::Zero(d);
    v[axis] = 1.0;
    return v;
}

DecayParams make_params(int d, uint64_t seed) {
    auto rng = make_rng(seed);
    return DecayParams::make(d, rng);
}

}  // namespace

TEST_CASE("single neighbor gets weight 1") {
    DecayParams p = make_params(4, 1);
    ProjectedItem item{3, Modality::Visual, unit(4, 0)};
    Pool pool = {&item};
    Vec alpha = attention_scores(unit(4, 1), 5, pool, Modality::Visual, p);
    REQUIRE(alpha.size() == 1);
    CHECK(alpha[0] == doctest::Approx(1.0));
}

TEST_CASE("equal scores, dt 0 and 1, lambda_v 0.47") {
    DecayParams p = make_params(4, 2);
    p.Wk.setZero();  // all raw scores equal (zero)
    p.lambda = Vec3(0.47, 0.11, 0.23);
    ProjectedItem a{5, Modality::Visual, unit(4, 0)};
    ProjectedItem b{4, Modality::Visual, unit(4, 1)};
    Pool pool = {&a, &b};
    Vec alpha = attention_scores(unit(4, 2), 5, pool, Modality::Visual, p);
    CHECK(alpha[0] == doctest::Approx(0.6154).epsilon(1e-3));
    CHECK(alpha[1] == doctest::Approx(0.3846).epsilon(1e-3));
    CHECK(alpha.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("lambda 0 reduces to softmax of s/tau") {
    auto rng = make_rng(3);
    DecayParams p = DecayParams::make(3, rng);
    p.lambda.setZero();
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<ProjectedItem> items;
    for (int t = 1; t <= 4; ++t)
        items.push_back({t, Modality::Text,
                         Vec::NullaryExpr(3, [&](Eigen::Index) { return gauss(rng); })});
    Pool pool;
    for (auto& it : items) pool.push_back(&it);
    Vec q = Vec::NullaryExpr(3, [&](Eigen::Index) { return gauss(rng); });
    Vec alpha = attention_scores(q, 9, pool, Modality::Text, p);

    const Vec qh = p.Wq * q;
    Vec s(4);
    for (int i = 0; i < 4; ++i)
        s[i] = qh.dot(p.Wk * items[i].e) / std::sqrt(3.0) / p.tau;
    Vec ref = (s.array() - s.maxCoeff()).exp();
    ref /= ref.sum();
    CHECK((alpha - ref).norm() < 1e-12);
}

TEST_CASE("weights decrease with dt when scores are equal and lambda > 0") {
    DecayParams p = make_params(4, 4);
    p.Wk.setZero();
    p.lambda = Vec3(0.3, 0.3, 0.3);
    std::vector<ProjectedItem> items;
    for (int t = 1; t <= 5; ++t) items.push_back({t, Modality::Knowledge, unit(4, t % 4)});
    Pool pool;
    for (auto& it : items) pool.push_back(&it);
    Vec alpha = attention_scores(unit(4, 0), 6, pool, Modality::Knowledge, p);
    for (int i = 1; i < 5; ++i) CHECK(alpha[i] > alpha[i - 1]);  // later t = smaller dt
}

TEST_CASE("fuse: empty pools give the zero vector") {
    DecayParams p = make_params(4, 5);
    std::array<Pool, kNumModalities> pools;
    MemoryVector m = fuse(unit(4, 0), 3, pools, p);
    CHECK(m.m.norm() == 0.0);
    CHECK(m.m.size() == 4);
}

TEST_CASE("fuse: dominant beta passes the single neighbor through") {
    DecayParams p = make_params(4, 6);
    p.beta_logits = Vec3(10.0, -10.0, -10.0);
    ProjectedItem item{2, Modality::Visual, unit(4, 1) * 2.5};
    std::array<Pool, kNumModalities> pools;
    pools[0] = {&item};
    MemoryVector m = fuse(unit(4, 0), 3, pools, p);
    CHECK((m.m - item.e).norm() < 1e-4 * item.e.norm());
}

TEST_CASE("fuse matches a scalar-loop oracle on a two-modality case") {
    auto rng = make_rng(7);
    const int d = 5;
    DecayParams p = DecayParams::make(d, rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<ProjectedItem> items;
    for (int i = 0; i < 4; ++i)
        items.push_back({i + 1, i < 2 ? Modality::Visual : Modality::Text,
                         Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); })});
    std::array<Pool, kNumModalities> pools;
    pools[0] = {&items[0], &items[1]};
    pools[1] = {&items[2], &items[3]};
    Vec q = Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });
    const int qt = 6;
    MemoryVector got = fuse(q, qt, pools, p);

    // independent scalar computation
    const Vec3 beta = p.beta();
    Vec expect = Vec::Zero(d);
    for (int m = 0; m < 2; ++m) {
        const auto& pool = pools[m];
        std::vector<double> z(pool.size());
        for (size_t i = 0; i < pool.size(); ++i) {
            double s = 0.0;
            for (int r = 0; r < d; ++r) {
                double qh = 0.0, kh = 0.0;
                for (int c = 0; c < d; ++c) {
                    qh += p.Wq(r, c) * q[c];
                    kh += p.Wk(r, c) * pool[i]->e[c];
                }
                s += qh * kh;
            }
            s /= std::sqrt(static_cast<double>(d));
            z[i] = s / p.tau - p.lambda[m] * (qt - pool[i]->t);
        }
        double mx = z[0];
        for (double v : z) mx = std::max(mx, v);
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - mx);
        for (size_t i = 0; i < pool.size(); ++i)
            for (int r = 0; r < d; ++r)
                expect[r] += beta[m] * (std::exp(z[i] - mx) / denom) * pool[i]->e[r];
    }
    CHECK((got.m - expect).norm() < 1e-9 * (1.0 + expect.norm()));
}

TEST_CASE("decay loss values") {
    DecayParams p = make_params(3, 8);
    p.lambda = p.lambda_gt;
    CHECK(decay_loss(p) == 0.0);
    p.lambda[0] = 0.57;
    CHECK(decay_loss(p) == doctest::Approx(0.01).epsilon(1e-9));
    p.lambda.setZero();
    CHECK(decay_loss(p) == doctest::Approx(0.2859).epsilon(1e-4));
}

TEST_CASE("fuse and decay gradients match finite differences") {
    auto rng = make_rng(9);
    const int d = 6;
    DecayParams p = DecayParams::make(d, rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<ProjectedItem> items;
    for (int i = 0; i < 6; ++i)
        items.push_back({i + 1, static_cast<Modality>(i % 3),
                         Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); })});
    std::array<Pool, kNumModalities> pools;
    for (auto& it : items) pools[static_cast<int>(it.m)].push_back(&it);
    Vec q = Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });
    Vec w = Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });

    auto loss = [&]() { return w.dot(fuse(q, 8, pools, p).m) + decay_loss(p); };
    AttentionGrads grads = AttentionGrads::zeros(d);
    FuseCache cache;
    fuse(q, 8, pools, p, &cache);
    fuse_backward(w, cache, p, grads);
    Vec3 lambda_grad = grads.lambda + decay_loss_grad(p);

    CHECK(grad_check(loss, p.lambda.data(), 3, lambda_grad.data(), 3, rng) < 1e-4);
    Vec beta_g = grads.beta_logits;
    CHECK(grad_check(loss, p.beta_logits.data(), 3, beta_g.data(), 3, rng) < 1e-4);
    CHECK(grad_check(loss, p.Wq, grads.Wq, 12, rng) < 1e-4);
    CHECK(grad_check(loss, p.Wk, grads.Wk, 12, rng) < 1e-4);
}

TEST_CASE("fuse backward query gradient matches finite differences") {
    auto rng = make_rng(10);
    const int d = 4;
    DecayParams p = DecayParams::make(d, rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<ProjectedItem> items;
    for (int i = 0; i < 4; ++i)
        items.push_back({i + 1, static_cast<Modality>(i % 3),
                         Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); })});
    std::array<Pool, kNumModalities> pools;
    for (auto& it : items) pools[static_cast<int>(it.m)].push_back(&it);
    Vec q = Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });
    Vec w = Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });

    auto loss = [&]() { return w.dot(fuse(q, 5, pools, p).m); };
    AttentionGrads grads = AttentionGrads::zeros(d);
    Vec dq = Vec::Zero(d);
    FuseCache cache;
    fuse(q, 5, pools, p, &cache);
    fuse_backward(w, cache, p, grads, &dq);
    CHECK(grad_check(loss, q, dq, 4, rng) < 1e-4);
}

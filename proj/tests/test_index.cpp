#include "doctest.h"

#include <cmath>
#include <set>

#include "graphmem/graph.hpp"
#include "graphmem/index.hpp"
#include "graphmem/rng.hpp"

using namespace graphmem;

namespace {

std::vector<ProjectedItem> random_stream(int T, int d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<ProjectedItem> items(T);
    for (int t = 0; t < T; ++t) {
        items[t].t = t + 1;
        items[t].m = Modality::Visual;
        items[t].e = Vec::NullaryExpr(d, [&](Eigen::Index) { return gauss(rng); });
    }
    return items;
}

}  // namespace

TEST_CASE("window regime: no tree until items age out") {
    auto rng = make_rng(1);
    auto items = random_stream(20, 4, rng);
    MemoryIndex index(7);
    index.insert(items[0]);
    CHECK(index.size() == 1);
    CHECK(index.tree() == nullptr);
    for (int t = 1; t < 20; ++t) index.insert(items[t]);
    CHECK(index.size() == 20);
    CHECK(index.tree() == nullptr);  // everything still inside the window
}

TEST_CASE("100 inserts: K = 10 leaves, window 20") {
    auto rng = make_rng(2);
    auto items = random_stream(100, 4, rng);
    MemoryIndex index(7);
    for (const auto& it : items) index.insert(it);
    REQUIRE(index.tree() != nullptr);
    CHECK(index.tree()->leaf_count() == 10);
    CHECK(index.window_start() == 80);
    CHECK(index.tree()->depth() == 3);  // ceil(log4 10) + 1
}

TEST_CASE("tree depth follows ceil(log4 K) + 1") {
    auto rng = make_rng(3);
    auto items = random_stream(200, 3, rng);
    std::vector<int> ids(items.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    for (int K : {1, 4, 5, 10, 16, 17, 64}) {
        auto root = build_tree(items, ids, K, rng);
        const int expect =
            K == 1 ? 1 : static_cast<int>(std::ceil(std::log(K) / std::log(4.0) - 1e-12)) + 1;
        CHECK(root->leaf_count() == K);
        CHECK(root->depth() == expect);
    }
}

TEST_CASE("k-means recovers well-separated blobs") {
    auto rng = make_rng(4);
    std::normal_distribution<double> gauss(0.0, 0.05);
    std::vector<ProjectedItem> items;
    std::vector<int> truth;
    for (int t = 0; t < 40; ++t) {
        const int blob = t % 4;
        Vec center = Vec::Zero(4);
        center[blob] = 10.0;
        items.push_back({t + 1, Modality::Visual,
                         center + Vec::NullaryExpr(4, [&](Eigen::Index) { return gauss(rng); })});
        truth.push_back(blob);
    }
    std::vector<int> ids(items.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    auto root = build_tree(items, ids, 4, rng);

    // collect leaf memberships and check each leaf is pure and complete
    std::vector<const TreeNode*> stack = {root.get()}, leaves;
    while (!stack.empty()) {
        const TreeNode* n = stack.back();
        stack.pop_back();
        if (n->is_leaf()) leaves.push_back(n);
        for (const auto& c : n->children) stack.push_back(c.get());
    }
    REQUIRE(leaves.size() == 4);
    std::set<int> blobs_seen;
    for (const TreeNode* leaf : leaves) {
        CHECK(leaf->member_items.size() == 10);
        std::set<int> blob_ids;
        for (int id : leaf->member_items) blob_ids.insert(truth[id]);
        CHECK(blob_ids.size() == 1);
        blobs_seen.insert(*blob_ids.begin());
    }
    CHECK(blobs_seen.size() == 4);
}

TEST_CASE("centroid and t-range invariants hold after rebuilds") {
    auto rng = make_rng(5);
    auto items = random_stream(120, 4, rng);
    MemoryIndex index(9);
    for (const auto& it : items) index.insert(it);
    std::vector<const TreeNode*> stack = {index.tree().get()};
    while (!stack.empty()) {
        const TreeNode* n = stack.back();
        stack.pop_back();
        CHECK(n->t_min <= n->t_max);
        if (n->is_leaf()) {
            Vec mean = Vec::Zero(4);
            for (int id : n->member_items) mean += index.item(id).e;
            mean /= static_cast<double>(n->member_items.size());
            CHECK((n->centroid - mean).norm() < 1e-9);
        } else {
            REQUIRE(n->children.size() <= 4);
            Vec mean = Vec::Zero(4);
            for (const auto& c : n->children) {
                mean += c->centroid;
                CHECK(c->t_min >= n->t_min);
                CHECK(c->t_max <= n->t_max);
                stack.push_back(c.get());
            }
            mean /= static_cast<double>(n->children.size());
            CHECK((n->centroid - mean).norm() < 1e-9);
        }
    }
}

TEST_CASE("retrieve_exact agrees with an independent re-sort") {
    auto rng = make_rng(6);
    auto items = random_stream(50, 5, rng);
    Vec q = items[17].e;
    Retrieval r = retrieve_exact(items, q, 50);
    CHECK(r.node_evaluations == 50);
    CHECK(r.ids.front() == 17);  // query equals a stored item
    std::vector<std::pair<double, int>> ref;
    for (int i = 0; i < 50; ++i) ref.push_back({cosine(q, items[i].e), i});
    std::sort(ref.begin(), ref.end(), [&](auto a, auto b) {
        if (a.first != b.first) return a.first > b.first;
        return items[a.second].t < items[b.second].t;
    });
    for (int i = 0; i < 50; ++i) CHECK(r.ids[i] == ref[i].second);
}

TEST_CASE("window-only retrieval is identical to the exact oracle") {
    // T <= 20 keeps everything in the flat window: exact equivalence.
    for (int trial = 0; trial < 1000; ++trial) {
        auto rng = make_rng(1000 + trial);
        const int T = 1 + static_cast<int>(rng() % 20);
        auto items = random_stream(T, 4, rng);
        MemoryIndex index(trial);
        for (const auto& it : items) index.insert(it);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vec q = Vec::NullaryExpr(4, [&](Eigen::Index) { return gauss(rng); });
        Retrieval got = index.retrieve(q, 10);
        Retrieval want = retrieve_exact(items, q, 10);
        CHECK(got.ids == want.ids);
    }
}

TEST_CASE("node evaluations stay within the beam bound at T=100") {
    auto rng = make_rng(8);
    auto items = random_stream(100, 4, rng);
    MemoryIndex index(7);
    for (const auto& it : items) index.insert(it);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec q = Vec::NullaryExpr(4, [&](Eigen::Index) { return gauss(rng); });
    Retrieval r = index.retrieve(q, 10);
    CHECK(r.node_evaluations <= 8 * index.tree()->depth());
}

TEST_CASE("same seed and insert sequence reproduce retrieval exactly") {
    auto build = [](uint64_t seed) {
        auto rng = make_rng(42);
        auto items = random_stream(150, 4, rng);
        MemoryIndex index(seed);
        for (const auto& it : items) index.insert(it);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vec q = Vec::NullaryExpr(4, [&](Eigen::Index) { return gauss(rng); });
        return index.retrieve(q, 10);
    };
    Retrieval a = build(5), b = build(5);
    CHECK(a.ids == b.ids);
    CHECK(a.scores == b.scores);
    CHECK(a.node_evaluations == b.node_evaluations);
}

TEST_CASE("out-of-order insert is rejected") {
    auto rng = make_rng(10);
    auto items = random_stream(2, 4, rng);
    MemoryIndex index(1);
    index.insert(items[1]);
    CHECK_THROWS(index.insert(items[0]));
}

TEST_CASE("candidates partition: window plus staged plus tree members") {
    auto rng = make_rng(11);
    auto items = random_stream(95, 4, rng);
    MemoryIndex index(3);
    for (const auto& it : items) index.insert(it);
    // staged items [covered, window_start) are always candidates
    CHECK(index.staged_start() <= index.window_start());
    auto cand = index.candidates(items[0].e);
    std::set<int> seen(cand.ids.begin(), cand.ids.end());
    CHECK(seen.size() == cand.ids.size());  // no duplicates
    for (int id = index.staged_start(); id < index.size(); ++id) CHECK(seen.count(id));
}

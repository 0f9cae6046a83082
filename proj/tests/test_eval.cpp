#include "doctest.h"

#include <cmath>

#include "graphmem/eval.hpp"
#include "graphmem/index.hpp"
#include "graphmem/rng.hpp"
#include "golden.hpp"

using namespace graphmem;

TEST_CASE("ndcg fixtures") {
    // relevant = {0, 2}; ranking hits at ranks 1 and 3
    std::set<int> rel = {0, 2};
    CHECK(ndcg_at_k({0, 1, 2}, rel, 3) == doctest::Approx(0.9197).epsilon(1e-4));
    CHECK(ndcg_at_k({0, 2, 1}, rel, 3) == doctest::Approx(1.0));
    CHECK(ndcg_at_k({1, 3, 4}, rel, 3) == doctest::Approx(0.0));
    CHECK(ndcg_at_k({0, 1, 2}, {}, 3) == 0.0);
}

TEST_CASE("precision, recall, mrr, map fixtures") {
    std::set<int> rel = {0, 1};
    std::vector<int> ranked = {0, 1, 2};
    CHECK(precision_at_k(ranked, rel, 3) == doctest::Approx(2.0 / 3.0));
    CHECK(recall_at_k(ranked, rel, 3) == doctest::Approx(1.0));
    CHECK(mrr(ranked, rel) == doctest::Approx(1.0));
    CHECK(map_at_k(ranked, rel, 3) == doctest::Approx(1.0));
    CHECK(precision_at_k({}, rel, 3) == 0.0);
    CHECK(recall_at_k({}, rel, 3) == 0.0);
    CHECK(mrr({}, rel) == 0.0);
    CHECK(map_at_k({}, rel, 3) == 0.0);
    // perfect ranking
    CHECK(ndcg_at_k({0, 1}, rel, 2) == doctest::Approx(1.0));
    CHECK(map_at_k({0, 1}, rel, 2) == doctest::Approx(1.0));
}

TEST_CASE("memory precision window is inclusive at 5") {
    std::set<int> expert = {20};
    CHECK(mp_at_k({18, 3, 22}, expert, 3) == doctest::Approx(2.0 / 3.0));
    CHECK(mp_at_k({25}, expert, 1) == doctest::Approx(1.0));  // |25-20| = 5 inside
    CHECK(mp_at_k({26}, expert, 1) == doctest::Approx(0.0));  // 6 outside
    CHECK(mp_at_k({15}, expert, 1) == doctest::Approx(1.0));  // lower boundary
    CHECK(mp_at_k({14}, expert, 1) == doctest::Approx(0.0));
    CHECK(mp_at_k({20}, expert, 1) == doctest::Approx(1.0));
    CHECK(mp_at_k({1, 2}, {}, 2) == 0.0);
}

TEST_CASE("metrics ignore permutations below rank k") {
    std::set<int> rel = {3, 5};
    std::vector<int> a = {3, 1, 5, 7, 8, 9};
    std::vector<int> b = {3, 1, 5, 9, 8, 7};
    CHECK(ndcg_at_k(a, rel, 3) == ndcg_at_k(b, rel, 3));
    CHECK(map_at_k(a, rel, 3) == map_at_k(b, rel, 3));
    CHECK(precision_at_k(a, rel, 3) == precision_at_k(b, rel, 3));
    CHECK(recall_at_k(a, rel, 3) == recall_at_k(b, rel, 3));
}

TEST_CASE("pr curve fixtures") {
    // separable: all positives first
    std::set<int> rel = {0, 1};
    CHECK(pr_curve({0, 1, 2, 3}, rel).auc == doctest::Approx(1.0));
    // scores .9/.8/.7/.6 with labels 1/0/1/0
    std::set<int> rel2 = {0, 2};
    PrCurve c = pr_curve({0, 1, 2, 3}, rel2);
    REQUIRE(c.points.size() == 5);
    CHECK(c.points[1].precision == doctest::Approx(1.0));
    CHECK(c.points[1].recall == doctest::Approx(0.5));
    CHECK(c.points[3].precision == doctest::Approx(2.0 / 3.0));
    CHECK(c.points[3].recall == doctest::Approx(1.0));
    CHECK(c.auc == doctest::Approx(0.5 + 0.5 * 0.5 * (0.5 + 2.0 / 3.0)).epsilon(1e-9));
    CHECK_THROWS(pr_curve({0, 1}, {}));
}

TEST_CASE("pr auc of random labels approaches the positive rate") {
    auto rng = make_rng(5);
    const int n = 4000;
    std::vector<int> ranked(n);
    std::set<int> rel;
    for (int i = 0; i < n; ++i) {
        ranked[i] = i;
        if (rng() % 4 == 0) rel.insert(i);  // positive rate 0.25
    }
    CHECK(pr_curve(ranked, rel).auc == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("benchmark: window regime has perfect overlap, flat scan is linear") {
    auto rows = bench_retrieval({10}, 4, 8, 0.1, 20, 5, 7);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].overlap_exact == doctest::Approx(1.0));

    auto rng = make_rng(3);
    auto items = clustered_items(137, 4, 8, 0.1, rng);
    CHECK(retrieve_exact(items, items[0].e, 10).node_evaluations == 137);
}

TEST_CASE("clustered overlap at T=100 stays above the golden floor") {
    auto rows = bench_retrieval({100}, 8, 16, 0.1, 50, 10, 7);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].overlap_exact >= GOLDEN_OVERLAP_FLOOR_T100);
}

TEST_CASE("bench csv format") {
    auto rows = bench_retrieval({10}, 2, 4, 0.1, 2, 2, 1);
    const std::string csv = bench_csv(rows);
    CHECK(csv.rfind("T,node_evaluations,latency_ns,overlap_exact\n", 0) == 0);
    CHECK(csv.find("\n10,") != std::string::npos);
}

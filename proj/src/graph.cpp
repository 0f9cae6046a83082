#include "graphmem/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace graphmem {

double cosine(const Vec& a, const Vec& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

void cosine_grad(const Vec& a, const Vec& b, Vec& da, Vec& db) {
    const double na = a.norm();
    const double nb = b.norm();
    da = Vec::Zero(a.size());
    db = Vec::Zero(b.size());
    if (na == 0.0 || nb == 0.0) return;
    const double c = a.dot(b) / (na * nb);
    da = b / (na * nb) - c * a / (na * na);
    db = a / (na * nb) - c * b / (nb * nb);
}

Vec EdgeFeatures::to_vector() const {
    Vec f = Vec::Zero(kEdgeFeatureDim);
    f[0] = dt;
    f[1] = cos;
    f[2] = same_mod;
    f[3 + static_cast<int>(mod_i)] = 1.0;
    f[6 + static_cast<int>(mod_j)] = 1.0;
    return f;
}

EdgeFeatures edge_features(const ProjectedItem& item_i, const ProjectedItem& item_j) {
    EdgeFeatures f;
    f.dt = std::abs(item_i.t - item_j.t) * kTemporalScale;
    f.cos = cosine(item_i.e, item_j.e);
    f.mod_i = item_i.m;
    f.mod_j = item_j.m;
    f.same_mod = (item_i.m == item_j.m) ? 1.0 : 0.0;
    return f;
}

PredictorParams PredictorParams::make(int d, std::mt19937_64& rng) {
    return PredictorParams{Mlp::make({2 * d + kEdgeFeatureDim, 512, 256, 1}, rng)};
}

Vec predictor_input(const Vec& e_i, const Vec& e_j, const EdgeFeatures& f) {
    Vec in(e_i.size() + e_j.size() + kEdgeFeatureDim);
    in << e_i, e_j, f.to_vector();
    return in;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double ez = std::exp(z);
    return ez / (1.0 + ez);
}

double edge_probability(const PredictorParams& params, const Vec& e_i, const Vec& e_j,
                        const EdgeFeatures& f) {
    const Vec in = predictor_input(e_i, e_j, f);
    if (in.size() != params.net.in_dim())
        throw std::invalid_argument("edge_probability: input dimension mismatch");
    return sigmoid(params.net.forward(in)(0, 0));
}

Vec pair_logits(const PredictorParams& params, const std::vector<ProjectedItem>& items,
                const std::vector<std::pair<int, int>>& pairs, Mlp::Cache* cache,
                Mat* inputs) {
    const int n = static_cast<int>(pairs.size());
    Mat X(params.net.in_dim(), n);
    for (int c = 0; c < n; ++c) {
        const auto& [i, j] = pairs[c];
        X.col(c) = predictor_input(items[i].e, items[j].e,
                                   edge_features(items[i], items[j]));
    }
    Mat out = params.net.forward(X, cache);
    if (inputs) *inputs = std::move(X);
    return out.row(0).transpose();
}

namespace {

RelevanceGraph graph_from_scored(std::vector<ProjectedItem> items,
                                 const std::vector<std::tuple<int, int, double>>& scored,
                                 double threshold) {
    RelevanceGraph g;
    g.nodes = std::move(items);
    g.adjacency.assign(g.nodes.size(), {});
    for (const auto& [i, j, p] : scored) {
        if (p > threshold) {
            g.adjacency[i].push_back(j);
            g.adjacency[j].push_back(i);
            g.edges.emplace_back(i, j, p);
        }
    }
    for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
    return g;
}

}  // namespace

bool RelevanceGraph::has_edge(int i, int j) const {
    const auto& nbrs = adjacency[i];
    return std::binary_search(nbrs.begin(), nbrs.end(), j);
}

RelevanceGraph build_graph(std::vector<ProjectedItem> items, const PredictorParams& params,
                           double threshold) {
    if (items.empty()) throw std::invalid_argument("build_graph: no items");
    std::sort(items.begin(), items.end(), item_order);
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(items.size());
    pairs.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<std::tuple<int, int, double>> scored;
    if (!pairs.empty()) {
        const Vec logits = pair_logits(params, items, pairs);
        scored.reserve(pairs.size());
        for (size_t c = 0; c < pairs.size(); ++c)
            scored.emplace_back(pairs[c].first, pairs[c].second,
                                sigmoid(logits[static_cast<int>(c)]));
    }
    return graph_from_scored(std::move(items), scored, threshold);
}

RelevanceGraph build_graph_cosine(std::vector<ProjectedItem> items, double tau) {
    if (items.empty()) throw std::invalid_argument("build_graph_cosine: no items");
    std::sort(items.begin(), items.end(), item_order);
    std::vector<std::tuple<int, int, double>> scored;
    const int n = static_cast<int>(items.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double c = cosine(items[i].e, items[j].e);
            // Report the raw cosine as the edge score; threshold applies to it.
            scored.emplace_back(i, j, c);
        }
    return graph_from_scored(std::move(items), scored, tau);
}

RelevanceGraph build_graph_dense(std::vector<ProjectedItem> items) {
    if (items.empty()) throw std::invalid_argument("build_graph_dense: no items");
    std::sort(items.begin(), items.end(), item_order);
    std::vector<std::tuple<int, int, double>> scored;
    const int n = static_cast<int>(items.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) scored.emplace_back(i, j, 1.0);
    return graph_from_scored(std::move(items), scored, 0.5);
}

SparsityStats sparsity_stats(const RelevanceGraph& graph) {
    SparsityStats s;
    const size_t n = graph.nodes.size();
    if (n == 0) return s;
    size_t max_deg = 0;
    for (const auto& nbrs : graph.adjacency) max_deg = std::max(max_deg, nbrs.size());
    s.degree_histogram.assign(max_deg + 1, 0);
    size_t deg_sum = 0;
    for (const auto& nbrs : graph.adjacency) {
        s.degree_histogram[nbrs.size()]++;
        deg_sum += nbrs.size();
    }
    s.edges_per_node = static_cast<double>(deg_sum) / static_cast<double>(n);
    return s;
}

std::string dump_edges(const RelevanceGraph& graph) {
    std::ostringstream out;
    char buf[64];
    for (const auto& [i, j, p] : graph.edges) {
        std::snprintf(buf, sizeof(buf), "%.6f", p);
        out << graph.nodes[i].t << " " << modality_name(graph.nodes[i].m) << " "
            << graph.nodes[j].t << " " << modality_name(graph.nodes[j].m) << " " << buf
            << "\n";
    }
    return out.str();
}

}  // namespace graphmem

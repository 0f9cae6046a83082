#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "graphmem/mlp.hpp"
#include "graphmem/types.hpp"

namespace graphmem {

constexpr int kEdgeFeatureDim = 9;
constexpr double kTemporalScale = 0.01;  // dt feature = |i - j| / 100

/// Cosine similarity; zero-norm vectors have no direction, so 0.
double cosine(const Vec& a, const Vec& b);

/// d(cos)/da and d(cos)/db. Zero for zero-norm inputs.
void cosine_grad(const Vec& a, const Vec& b, Vec& da, Vec& db);

/// Pairwise feature vector: [dt, cos, same_mod, onehot(m_i), onehot(m_j)].
struct EdgeFeatures {
    double dt = 0.0;
    double cos = 0.0;
    double same_mod = 0.0;
    Modality mod_i = Modality::Visual;
    Modality mod_j = Modality::Visual;

    Vec to_vector() const;
};

EdgeFeatures edge_features(const ProjectedItem& item_i, const ProjectedItem& item_j);

/// Relevance predictor g_phi: MLP over concat(e_i, e_j, f_ij) with fixed
/// hidden sizes [512, 256] and a single logit output.
struct PredictorParams {
    Mlp net;

    static PredictorParams make(int d, std::mt19937_64& rng);
    int d() const { return (net.in_dim() - kEdgeFeatureDim) / 2; }
};

Vec predictor_input(const Vec& e_i, const Vec& e_j, const EdgeFeatures& f);

/// sigma(g_phi(e_i, e_j, f)) in (0, 1).
double edge_probability(const PredictorParams& params, const Vec& e_i, const Vec& e_j,
                        const EdgeFeatures& f);

double sigmoid(double z);

/// Batched logits for a list of item-index pairs over `items`.
Vec pair_logits(const PredictorParams& params, const std::vector<ProjectedItem>& items,
                const std::vector<std::pair<int, int>>& pairs, Mlp::Cache* cache = nullptr,
                Mat* inputs = nullptr);

struct RelevanceGraph {
    std::vector<ProjectedItem> nodes;             // ordered by (t, modality rank)
    std::vector<std::vector<int>> adjacency;      // sorted neighbor lists, symmetric
    std::vector<std::tuple<int, int, double>> edges;  // (i, j, probability), i < j

    bool has_edge(int i, int j) const;
};

/// Scores all pairs and keeps edges with probability strictly above the
/// threshold. Node order is (t, modality rank v < x < k).
RelevanceGraph build_graph(std::vector<ProjectedItem> items, const PredictorParams& params,
                           double threshold = 0.5);

/// Same contract, but edges come from a fixed cosine threshold instead of
/// the learned predictor.
RelevanceGraph build_graph_cosine(std::vector<ProjectedItem> items, double tau);

/// Fully connected graph over the same node ordering.
RelevanceGraph build_graph_dense(std::vector<ProjectedItem> items);

struct SparsityStats {
    double edges_per_node = 0.0;  // 2|E| / |V|
    std::vector<int> degree_histogram;
};

SparsityStats sparsity_stats(const RelevanceGraph& graph);

/// Debug edge list: "i_t i_m j_t j_m p" per line, 6-decimal probabilities.
std::string dump_edges(const RelevanceGraph& graph);

}  // namespace graphmem

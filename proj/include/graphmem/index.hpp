#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "graphmem/types.hpp"

namespace graphmem {

struct TreeNode {
    Vec centroid;
    int t_min = 0;
    int t_max = 0;
    std::vector<std::shared_ptr<const TreeNode>> children;  // fan-out <= 4
    std::vector<int> member_items;                          // leaves only

    bool is_leaf() const { return children.empty(); }
    int depth() const;        // levels including the leaf level
    int leaf_count() const;
};

/// K-leaf cluster tree over the given item ids: k-means++ seeding and 10
/// Lloyd iterations for the leaf clusters, then levels of fan-out <= 4
/// grouped by temporal order up to a single root. K is clamped to the
/// number of items.
std::shared_ptr<const TreeNode> build_tree(const std::vector<ProjectedItem>& items,
                                           const std::vector<int>& ids, int K,
                                           std::mt19937_64& rng);

struct Retrieval {
    std::vector<int> ids;
    std::vector<double> scores;
    int node_evaluations = 0;  // tree centroid evaluations only
};

/// Full-scan cosine ranking with the same tie-break (smaller t first).
/// Oracle for tests and the flat baseline in benchmarks.
Retrieval retrieve_exact(const std::vector<ProjectedItem>& items, const Vec& query_e,
                         int k);

/// Two-tier memory over one modality stream: a flat window of the most
/// recent items plus a 4-ary prototype tree over everything older. The
/// tree is rebuilt every `rebuild_every` insertions with K = floor(T/10)
/// leaves; items that left the window since the last rebuild stay in a
/// staged list that retrieval scans directly.
class MemoryIndex {
public:
    explicit MemoryIndex(uint64_t seed, int window = 20, int rebuild_every = 10);

    /// Append-only; item.t must exceed every stored timestep.
    void insert(const ProjectedItem& item);

    struct CandidateSet {
        std::vector<int> ids;
        int node_evaluations = 0;
    };

    /// Window ∪ staged ∪ members of the leaves reached by beam descent.
    CandidateSet candidates(const Vec& query_e, int beam = 2) const;

    /// Candidates ranked by cosine to the query; k capped at candidate count.
    Retrieval retrieve(const Vec& query_e, int k = 10, int beam = 2) const;

    const std::vector<ProjectedItem>& items() const { return items_; }
    const ProjectedItem& item(int id) const { return items_[id]; }
    int size() const { return static_cast<int>(items_.size()); }
    std::shared_ptr<const TreeNode> tree() const { return tree_; }
    int window_start() const;        // first id inside the flat window
    int staged_start() const { return covered_; }

private:
    void rebuild();

    std::vector<ProjectedItem> items_;
    std::shared_ptr<const TreeNode> tree_;
    int covered_ = 0;  // ids < covered_ are in the tree
    int window_;
    int rebuild_every_;
    uint64_t seed_;
    uint64_t rebuild_count_ = 0;
};

}  // namespace graphmem

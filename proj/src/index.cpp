#include "graphmem/index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "graphmem/graph.hpp"
#include "graphmem/rng.hpp"

namespace graphmem {

int TreeNode::depth() const {
    if (is_leaf()) return 1;
    int d = 0;
    for (const auto& c : children) d = std::max(d, c->depth());
    return d + 1;
}

int TreeNode::leaf_count() const {
    if (is_leaf()) return 1;
    int n = 0;
    for (const auto& c : children) n += c->leaf_count();
    return n;
}

namespace {

// Lloyd k-means with k-means++ seeding over the embeddings of `ids`.
// Returns per-id cluster assignment; empty clusters are repaired by
// stealing the point farthest from its centroid.
std::vector<int> kmeans_assign(const std::vector<ProjectedItem>& items,
                               const std::vector<int>& ids, int K, std::mt19937_64& rng,
                               int iters = 10) {
    const int n = static_cast<int>(ids.size());
    const int d = static_cast<int>(items[ids[0]].e.size());

    // k-means++ seeding
    std::vector<Vec> centers;
    std::uniform_int_distribution<int> first(0, n - 1);
    centers.push_back(items[ids[first(rng)]].e);
    std::vector<double> dist2(n);
    while (static_cast<int>(centers.size()) < K) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const Vec& c : centers)
                best = std::min(best, (items[ids[i]].e - c).squaredNorm());
            dist2[i] = best;
            total += best;
        }
        int pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            for (; pick < n - 1; ++pick) {
                r -= dist2[pick];
                if (r <= 0.0) break;
            }
        }
        centers.push_back(items[ids[pick]].e);
    }

    std::vector<int> assign(n, 0);
    for (int it = 0; it < iters; ++it) {
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            int arg = 0;
            for (int c = 0; c < K; ++c) {
                const double dd = (items[ids[i]].e - centers[c]).squaredNorm();
                if (dd < best) {
                    best = dd;
                    arg = c;
                }
            }
            assign[i] = arg;
        }
        std::vector<Vec> sums(K, Vec::Zero(d));
        std::vector<int> counts(K, 0);
        for (int i = 0; i < n; ++i) {
            sums[assign[i]] += items[ids[i]].e;
            counts[assign[i]]++;
        }
        for (int c = 0; c < K; ++c) {
            if (counts[c] == 0) {
                // steal the point farthest from its current centroid
                int far_i = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    if (counts[assign[i]] <= 1) continue;
                    const double dd = (items[ids[i]].e - centers[assign[i]]).squaredNorm();
                    if (dd > far_d) {
                        far_d = dd;
                        far_i = i;
                    }
                }
                counts[assign[far_i]]--;
                sums[assign[far_i]] -= items[ids[far_i]].e;
                assign[far_i] = c;
                counts[c] = 1;
                sums[c] = items[ids[far_i]].e;
            }
            centers[c] = sums[c] / static_cast<double>(counts[c]);
        }
    }
    // final assignment against the last centroids
    for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::max();
        int arg = 0;
        for (int c = 0; c < K; ++c) {
            const double dd = (items[ids[i]].e - centers[c]).squaredNorm();
            if (dd < best) {
                best = dd;
                arg = c;
            }
        }
        assign[i] = arg;
    }
    return assign;
}

}  // namespace

std::shared_ptr<const TreeNode> build_tree(const std::vector<ProjectedItem>& items,
                                           const std::vector<int>& ids, int K,
                                           std::mt19937_64& rng) {
    if (ids.empty()) throw std::invalid_argument("build_tree: no items");
    K = std::max(1, std::min(K, static_cast<int>(ids.size())));

    const std::vector<int> assign = kmeans_assign(items, ids, K, rng);

    std::vector<std::shared_ptr<TreeNode>> leaves;
    for (int c = 0; c < K; ++c) {
        auto node = std::make_shared<TreeNode>();
        for (size_t i = 0; i < ids.size(); ++i)
            if (assign[i] == c) node->member_items.push_back(ids[i]);
        if (node->member_items.empty()) continue;
        const int d = static_cast<int>(items[node->member_items[0]].e.size());
        node->centroid = Vec::Zero(d);
        node->t_min = std::numeric_limits<int>::max();
        node->t_max = std::numeric_limits<int>::min();
        for (int id : node->member_items) {
            node->centroid += items[id].e;
            node->t_min = std::min(node->t_min, items[id].t);
            node->t_max = std::max(node->t_max, items[id].t);
        }
        node->centroid /= static_cast<double>(node->member_items.size());
        leaves.push_back(std::move(node));
    }

    // Group upward in temporal order, fan-out <= 4, until a single root.
    std::vector<std::shared_ptr<TreeNode>> level = std::move(leaves);
    auto by_time = [](const std::shared_ptr<TreeNode>& a, const std::shared_ptr<TreeNode>& b) {
        if (a->t_min != b->t_min) return a->t_min < b->t_min;
        return a->t_max < b->t_max;
    };
    std::sort(level.begin(), level.end(), by_time);
    while (level.size() > 1) {
        const int n = static_cast<int>(level.size());
        const int groups = (n + 3) / 4;
        std::vector<std::shared_ptr<TreeNode>> next;
        for (int gidx = 0; gidx < groups; ++gidx) {
            // balanced contiguous slices
            const int lo = gidx * n / groups;
            const int hi = (gidx + 1) * n / groups;
            auto parent = std::make_shared<TreeNode>();
            const int d = static_cast<int>(level[lo]->centroid.size());
            parent->centroid = Vec::Zero(d);
            parent->t_min = std::numeric_limits<int>::max();
            parent->t_max = std::numeric_limits<int>::min();
            for (int i = lo; i < hi; ++i) {
                parent->centroid += level[i]->centroid;
                parent->t_min = std::min(parent->t_min, level[i]->t_min);
                parent->t_max = std::max(parent->t_max, level[i]->t_max);
                parent->children.push_back(level[i]);
            }
            parent->centroid /= static_cast<double>(hi - lo);
            next.push_back(std::move(parent));
        }
        level = std::move(next);
    }
    return level.front();
}

Retrieval retrieve_exact(const std::vector<ProjectedItem>& items, const Vec& query_e,
                         int k) {
    Retrieval r;
    std::vector<int> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(items.size());
    for (size_t i = 0; i < items.size(); ++i) score[i] = cosine(query_e, items[i].e);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return items[a].t < items[b].t;
    });
    const int take = std::min<int>(k, static_cast<int>(order.size()));
    for (int i = 0; i < take; ++i) {
        r.ids.push_back(order[i]);
        r.scores.push_back(score[order[i]]);
    }
    r.node_evaluations = static_cast<int>(items.size());
    return r;
}

MemoryIndex::MemoryIndex(uint64_t seed, int window, int rebuild_every)
    : window_(window), rebuild_every_(rebuild_every), seed_(seed) {}

int MemoryIndex::window_start() const {
    return std::max(0, static_cast<int>(items_.size()) - window_);
}

void MemoryIndex::insert(const ProjectedItem& item) {
    if (!items_.empty() && item.t <= items_.back().t)
        throw std::invalid_argument("MemoryIndex::insert: out-of-order timestep");
    items_.push_back(item);
    if (static_cast<int>(items_.size()) % rebuild_every_ == 0) rebuild();
}

void MemoryIndex::rebuild() {
    const int old_count = window_start();
    if (old_count == 0) return;
    std::vector<int> ids(old_count);
    std::iota(ids.begin(), ids.end(), 0);
    const int T = static_cast<int>(items_.size());
    const int K = std::max(1, T / 10);
    auto rng = make_rng(seed_, 0x7265ULL + rebuild_count_);
    tree_ = build_tree(items_, ids, K, rng);
    covered_ = old_count;
    ++rebuild_count_;
}

MemoryIndex::CandidateSet MemoryIndex::candidates(const Vec& query_e, int beam) const {
    CandidateSet out;
    const int n = static_cast<int>(items_.size());
    for (int id = covered_; id < n; ++id) out.ids.push_back(id);  // staged + window
    if (!tree_) return out;

    std::vector<const TreeNode*> frontier = {tree_.get()};
    while (!frontier.front()->is_leaf()) {
        std::vector<std::pair<double, const TreeNode*>> scored;
        for (const TreeNode* node : frontier)
            for (const auto& child : node->children) {
                scored.emplace_back(cosine(query_e, child->centroid), child.get());
                ++out.node_evaluations;
            }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second->t_min < b.second->t_min;
        });
        frontier.clear();
        for (int i = 0; i < std::min<int>(beam, static_cast<int>(scored.size())); ++i)
            frontier.push_back(scored[i].second);
    }
    for (const TreeNode* leaf : frontier)
        for (int id : leaf->member_items) out.ids.push_back(id);
    return out;
}

Retrieval MemoryIndex::retrieve(const Vec& query_e, int k, int beam) const {
    const CandidateSet cand = candidates(query_e, beam);
    Retrieval r;
    r.node_evaluations = cand.node_evaluations;
    std::vector<std::pair<double, int>> scored;
    scored.reserve(cand.ids.size());
    for (int id : cand.ids) scored.emplace_back(cosine(query_e, items_[id].e), id);
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return items_[a.second].t < items_[b.second].t;
    });
    const int take = std::min<int>(k, static_cast<int>(scored.size()));
    for (int i = 0; i < take; ++i) {
        r.ids.push_back(scored[i].second);
        r.scores.push_back(scored[i].first);
    }
    return r;
}

}  // namespace graphmem

#pragma once

#include <Eigen/Dense>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphmem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;

enum class Modality : int { Visual = 0, Text = 1, Knowledge = 2 };
constexpr int kNumModalities = 3;

inline const char* modality_name(Modality m) {
    switch (m) {
        case Modality::Visual: return "v";
        case Modality::Text: return "x";
        case Modality::Knowledge: return "k";
    }
    return "?";
}

inline Modality modality_from_name(const std::string& s) {
    if (s == "v") return Modality::Visual;
    if (s == "x") return Modality::Text;
    if (s == "k") return Modality::Knowledge;
    throw std::invalid_argument("unknown modality: " + s);
}

/// One timestep of an episode: three raw modality embeddings plus the
/// action-type label of the action taken at that step.
struct Observation {
    int t = 0;  // 1-based, consecutive within an episode
    Vec v, x, k;
    int action_type = 0;
};

struct Episode {
    std::string task_id;
    std::vector<Observation> observations;
    int reward = 0;  // task success, 0 or 1
    std::set<int> expert_states;
};

/// A single (timestep, modality) memory item in the shared embedding space.
struct ProjectedItem {
    int t = 0;
    Modality m = Modality::Visual;
    Vec e;
};

// Node ordering used throughout: (t, modality rank v < x < k).
inline bool item_order(const ProjectedItem& a, const ProjectedItem& b) {
    if (a.t != b.t) return a.t < b.t;
    return static_cast<int>(a.m) < static_cast<int>(b.m);
}

inline const Vec& modality_vec(const Observation& o, Modality m) {
    switch (m) {
        case Modality::Visual: return o.v;
        case Modality::Text: return o.x;
        case Modality::Knowledge: return o.k;
    }
    throw std::logic_error("bad modality");
}

}  // namespace graphmem

#pragma once

#include <array>
#include <random>

#include "graphmem/types.hpp"

namespace graphmem {

/// Per-modality linear maps from raw embedding space (d_raw) into the
/// shared space (d). Frozen by default; training them is opt-in.
struct ProjectionParams {
    std::array<Mat, kNumModalities> W;  // each d x d_raw

    int d() const { return static_cast<int>(W[0].rows()); }
    int d_raw() const { return static_cast<int>(W[0].cols()); }

    /// Identity on the leading min(d, d_raw) coordinates, zero elsewhere.
    /// Keeps cosines of raw vectors intact when d >= d_raw.
    static ProjectionParams identity(int d_raw, int d);
    static ProjectionParams random(int d_raw, int d, std::mt19937_64& rng);
};

/// One ProjectedItem per modality, e = W_m * raw.
std::array<ProjectedItem, kNumModalities> project(const Observation& obs,
                                                  const ProjectionParams& params);

/// All items of an episode, ordered by (t, modality rank v < x < k).
std::vector<ProjectedItem> project_episode(const Episode& episode,
                                           const ProjectionParams& params);

}  // namespace graphmem

#include "graphmem/projection.hpp"

#include <stdexcept>

namespace graphmem {

ProjectionParams ProjectionParams::identity(int d_raw, int d) {
    ProjectionParams p;
    for (int m = 0; m < kNumModalities; ++m) {
        p.W[m] = Mat::Zero(d, d_raw);
        const int n = std::min(d, d_raw);
        p.W[m].topLeftCorner(n, n).setIdentity();
    }
    return p;
}

ProjectionParams ProjectionParams::random(int d_raw, int d, std::mt19937_64& rng) {
    ProjectionParams p;
    const double bound = std::sqrt(6.0 / (d_raw + d));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int m = 0; m < kNumModalities; ++m) {
        p.W[m] = Mat(d, d_raw);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d_raw; ++j) p.W[m](i, j) = dist(rng);
    }
    return p;
}

std::array<ProjectedItem, kNumModalities> project(const Observation& obs,
                                                  const ProjectionParams& params) {
    std::array<ProjectedItem, kNumModalities> out;
    for (int m = 0; m < kNumModalities; ++m) {
        const Modality mod = static_cast<Modality>(m);
        const Vec& raw = modality_vec(obs, mod);
        if (raw.size() != params.d_raw())
            throw std::invalid_argument("projection: raw dimension mismatch");
        out[m] = ProjectedItem{obs.t, mod, params.W[m] * raw};
    }
    return out;
}

std::vector<ProjectedItem> project_episode(const Episode& episode,
                                           const ProjectionParams& params) {
    std::vector<ProjectedItem> items;
    items.reserve(episode.observations.size() * kNumModalities);
    for (const Observation& o : episode.observations) {
        auto projected = project(o, params);
        for (auto& it : projected) items.push_back(std::move(it));
    }
    return items;
}

}  // namespace graphmem

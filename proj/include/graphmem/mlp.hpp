#pragma once

#include <random>
#include <vector>

#include "graphmem/types.hpp"

namespace graphmem {

/// Fully-connected network with ReLU activations on all layers except the
/// last (linear output). Also doubles as its own gradient container: a
/// gradient has the same shapes as the parameters it differentiates.
struct Mlp {
    std::vector<Mat> W;
    std::vector<Vec> b;

    static Mlp make(const std::vector<int>& sizes, std::mt19937_64& rng);
    static Mlp zeros_like(const Mlp& other);

    int in_dim() const { return static_cast<int>(W.front().cols()); }
    int out_dim() const { return static_cast<int>(W.back().rows()); }
    int num_layers() const { return static_cast<int>(W.size()); }

    /// Post-activation values per layer, kept for the backward pass.
    struct Cache {
        std::vector<Mat> a;  // a[l] = activation after layer l; a.back() is the linear output
    };

    /// X is (in_dim x batch); returns (out_dim x batch).
    Mat forward(const Mat& X, Cache* cache = nullptr) const;

    /// dY is (out_dim x batch). Accumulates parameter gradients into
    /// `grads` (must be zeros_like-shaped) and, if dX is non-null, writes
    /// the gradient w.r.t. the input.
    void backward(const Mat& X, const Cache& cache, const Mat& dY, Mlp& grads,
                  Mat* dX = nullptr) const;

    void add_scaled(const Mlp& other, double scale);
    double squared_norm() const;
    bool all_finite() const;
    void set_zero();
};

}  // namespace graphmem

#include "graphmem/mlp.hpp"

#include <cmath>

namespace graphmem {

Mlp Mlp::make(const std::vector<int>& sizes, std::mt19937_64& rng) {
    Mlp mlp;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Mat W(fan_out, fan_in);
        for (int i = 0; i < W.rows(); ++i)
            for (int j = 0; j < W.cols(); ++j) W(i, j) = dist(rng);
        mlp.W.push_back(std::move(W));
        mlp.b.push_back(Vec::Zero(fan_out));
    }
    return mlp;
}

Mlp Mlp::zeros_like(const Mlp& other) {
    Mlp g;
    for (const auto& W : other.W) g.W.push_back(Mat::Zero(W.rows(), W.cols()));
    for (const auto& b : other.b) g.b.push_back(Vec::Zero(b.size()));
    return g;
}

Mat Mlp::forward(const Mat& X, Cache* cache) const {
    if (cache) cache->a.clear();
    Mat a = X;
    for (int l = 0; l < num_layers(); ++l) {
        Mat z = (W[l] * a).colwise() + b[l];
        if (l + 1 < num_layers()) z = z.cwiseMax(0.0);
        a = std::move(z);
        if (cache) cache->a.push_back(a);
    }
    return a;
}

void Mlp::backward(const Mat& X, const Cache& cache, const Mat& dY, Mlp& grads,
                   Mat* dX) const {
    Mat delta = dY;
    for (int l = num_layers() - 1; l >= 0; --l) {
        if (l + 1 < num_layers()) {
            // ReLU mask from the stored post-activation.
            delta = delta.cwiseProduct(
                (cache.a[l].array() > 0.0).cast<double>().matrix());
        }
        const Mat& input = (l == 0) ? X : cache.a[l - 1];
        grads.W[l].noalias() += delta * input.transpose();
        grads.b[l] += delta.rowwise().sum();
        if (l > 0 || dX) {
            Mat prev = W[l].transpose() * delta;
            if (l == 0) {
                *dX = std::move(prev);
            } else {
                delta = std::move(prev);
            }
        }
    }
}

void Mlp::add_scaled(const Mlp& other, double scale) {
    for (int l = 0; l < num_layers(); ++l) {
        W[l] += scale * other.W[l];
        b[l] += scale * other.b[l];
    }
}

double Mlp::squared_norm() const {
    double s = 0.0;
    for (const auto& w : W) s += w.squaredNorm();
    for (const auto& v : b) s += v.squaredNorm();
    return s;
}

bool Mlp::all_finite() const {
    for (const auto& w : W)
        if (!w.allFinite()) return false;
    for (const auto& v : b)
        if (!v.allFinite()) return false;
    return true;
}

void Mlp::set_zero() {
    for (auto& w : W) w.setZero();
    for (auto& v : b) v.setZero();
}

}  // namespace graphmem

#pragma once

#include <string>
#include <vector>

#include "isgan/core/conv.hpp"
#include "isgan/core/norm.hpp"
#include "isgan/core/ops.hpp"
#include "isgan/core/rng.hpp"

namespace isgan {

struct NamedParam {
    std::string name;
    Var* var;
};

struct NamedBuffer {
    std::string name;
    Tensor* tensor;
};

inline Tensor randn_tensor(std::vector<int> shape, double stddev, RngStream rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = stddev * rng.normal();
    return t;
}

/// He-style scaling for leaky-relu stacks
inline double he_std(std::int64_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

class LinearLayer {
public:
    LinearLayer() = default;
    LinearLayer(int in, int out, bool with_bias, RngStream rng) {
        weight = Var::leaf(randn_tensor({out, in}, he_std(in), rng.derive(1)), true);
        if (with_bias) bias = Var::leaf(Tensor({out}), true);
    }
    Var forward(const Var& x) const { return linear(x, weight, bias); }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        out.push_back({p + ".weight", &weight});
        if (bias.defined()) out.push_back({p + ".bias", &bias});
    }
    Var weight, bias;
};

class Conv2dLayer {
public:
    Conv2dLayer() = default;
    Conv2dLayer(int in, int out, int k, int stride_, int pad_, RngStream rng)
        : stride(stride_), pad(pad_) {
        weight = Var::leaf(randn_tensor({out, in, k, k}, he_std(static_cast<std::int64_t>(in) * k * k),
                                        rng.derive(2)),
                           true);
        bias = Var::leaf(Tensor({out}), true);
    }
    Var forward(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        out.push_back({p + ".weight", &weight});
        out.push_back({p + ".bias", &bias});
    }
    Var weight, bias;
    int stride = 1, pad = 0;
};

class ConvT2dLayer {
public:
    ConvT2dLayer() = default;
    ConvT2dLayer(int in, int out, int k, int stride_, int pad_, RngStream rng)
        : stride(stride_), pad(pad_) {
        weight = Var::leaf(randn_tensor({in, out, k, k}, he_std(static_cast<std::int64_t>(in) * k * k),
                                        rng.derive(3)),
                           true);
        bias = Var::leaf(Tensor({out}), true);
    }
    Var forward(const Var& x) const { return conv_transpose2d(x, weight, bias, stride, pad); }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        out.push_back({p + ".weight", &weight});
        out.push_back({p + ".bias", &bias});
    }
    Var weight, bias;
    int stride = 2, pad = 1;
};

class BatchNorm2dLayer {
public:
    BatchNorm2dLayer() = default;
    explicit BatchNorm2dLayer(int channels, double momentum_ = 0.1)
        : momentum(momentum_),
          running_mean(Tensor({channels})),
          running_var(Tensor({channels}, 1.0)) {
        gamma = Var::leaf(Tensor({channels}, 1.0), true);
        beta = Var::leaf(Tensor({channels}), true);
    }
    Var forward(const Var& x, bool training) {
        return batch_norm2d(x, gamma, beta, running_mean, running_var, training, momentum);
    }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        out.push_back({p + ".gamma", &gamma});
        out.push_back({p + ".beta", &beta});
    }
    void buffers(const std::string& p, std::vector<NamedBuffer>& out) {
        out.push_back({p + ".running_mean", &running_mean});
        out.push_back({p + ".running_var", &running_var});
    }
    Var gamma, beta;
    double momentum = 0.1;
    Tensor running_mean, running_var;
};

inline void zero_grads(const std::vector<NamedParam>& params) {
    for (const auto& p : params) p.var->clear_grad();
}

inline void set_trainable(const std::vector<NamedParam>& params, bool trainable) {
    for (const auto& p : params) p.var->set_requires_grad(trainable);
}

/// Rescales gradients in place if their global L2 norm exceeds max_norm.
/// Returns the pre-clip norm.
inline double clip_global_grad_norm(const std::vector<NamedParam>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        if (!p.var->has_grad()) continue;
        const Tensor& g = p.var->grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
    }
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double s = max_norm / norm;
        for (const auto& p : params) {
            if (!p.var->has_grad()) continue;
            Tensor& g = const_cast<Tensor&>(p.var->grad());
            g.scale_(s);
        }
    }
    return norm;
}

}  // namespace isgan

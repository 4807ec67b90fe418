#pragma once

#include "isgan/core/ops.hpp"
#include "isgan/core/rng.hpp"

namespace isgan {

/// Batch norm over (N,H,W) per channel. `running_mean/var` are plain buffers
/// updated in training mode and used verbatim in eval mode; gradients never
/// flow through them.
inline Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                        Tensor& running_var, bool training, double momentum = 0.1,
                        double eps = 1e-5) {
    const Tensor& X = x.value();
    if (X.ndim() != 4) throw std::invalid_argument("batch_norm2d: rank");
    int n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3);
    const std::int64_t m = static_cast<std::int64_t>(n) * h * w;
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;

    Tensor mu({c}), var({c});
    if (training) {
        for (int ch = 0; ch < c; ++ch) {
            double s = 0;
            for (int i = 0; i < n; ++i) {
                const double* p = X.data() + X.idx4(i, ch, 0, 0);
                for (std::int64_t l = 0; l < plane; ++l) s += p[l];
            }
            mu[ch] = s / static_cast<double>(m);
            double v = 0;
            for (int i = 0; i < n; ++i) {
                const double* p = X.data() + X.idx4(i, ch, 0, 0);
                for (std::int64_t l = 0; l < plane; ++l) {
                    double d = p[l] - mu[ch];
                    v += d * d;
                }
            }
            var[ch] = v / static_cast<double>(m);
        }
        for (int ch = 0; ch < c; ++ch) {
            running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mu[ch];
            running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * var[ch];
        }
    } else {
        mu = running_mean;
        var = running_var;
    }

    Tensor inv({c});
    for (int ch = 0; ch < c; ++ch) inv[ch] = 1.0 / std::sqrt(var[ch] + eps);

    Tensor xhat({n, c, h, w});
    Tensor out({n, c, h, w});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double* p = X.data() + X.idx4(i, ch, 0, 0);
            double* xh = xhat.data() + xhat.idx4(i, ch, 0, 0);
            double* po = out.data() + out.idx4(i, ch, 0, 0);
            double g = gamma.value()[ch], b = beta.value()[ch];
            for (std::int64_t l = 0; l < plane; ++l) {
                xh[l] = (p[l] - mu[ch]) * inv[ch];
                po[l] = g * xh[l] + b;
            }
        }

    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    return make_op(std::move(out), {x, gamma, beta},
                   [xn, gn, bn, xhat, inv, training, n, c, h, w, m, plane](Node& self) {
        const Tensor& G = self.grad;
        const Tensor& gam = gn->value;
        if (gn->requires_grad || bn->requires_grad) {
            Tensor dg({c}), db({c});
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const double* gp = G.data() + G.idx4(i, ch, 0, 0);
                    const double* xh = xhat.data() + xhat.idx4(i, ch, 0, 0);
                    for (std::int64_t l = 0; l < plane; ++l) {
                        dg[ch] += gp[l] * xh[l];
                        db[ch] += gp[l];
                    }
                }
            if (gn->requires_grad) gn->accumulate(dg);
            if (bn->requires_grad) bn->accumulate(db);
        }
        if (!xn->requires_grad) return;
        Tensor gx({n, c, h, w});
        if (!training) {
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const double* gp = G.data() + G.idx4(i, ch, 0, 0);
                    double* gxp = gx.data() + gx.idx4(i, ch, 0, 0);
                    for (std::int64_t l = 0; l < plane; ++l) gxp[l] = gp[l] * gam[ch] * inv[ch];
                }
        } else {
            // dx = inv/M * (M*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
            for (int ch = 0; ch < c; ++ch) {
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double* gp = G.data() + G.idx4(i, ch, 0, 0);
                    const double* xh = xhat.data() + xhat.idx4(i, ch, 0, 0);
                    for (std::int64_t l = 0; l < plane; ++l) {
                        double dxh = gp[l] * gam[ch];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh[l];
                    }
                }
                for (int i = 0; i < n; ++i) {
                    const double* gp = G.data() + G.idx4(i, ch, 0, 0);
                    const double* xh = xhat.data() + xhat.idx4(i, ch, 0, 0);
                    double* gxp = gx.data() + gx.idx4(i, ch, 0, 0);
                    for (std::int64_t l = 0; l < plane; ++l) {
                        double dxh = gp[l] * gam[ch];
                        gxp[l] = inv[ch] / static_cast<double>(m) *
                                 (static_cast<double>(m) * dxh - sum_dxh - xh[l] * sum_dxh_xh);
                    }
                }
            }
        }
        xn->accumulate(gx);
    });
}

/// Instance norm, no affine parameters: normalizes each (n, c) plane.
inline Var instance_norm2d(const Var& x, double eps = 1e-5) {
    const Tensor& X = x.value();
    if (X.ndim() != 4) throw std::invalid_argument("instance_norm2d: rank");
    int n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Tensor out({n, c, h, w});
    Tensor inv({n, c});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double* p = X.data() + X.idx4(i, ch, 0, 0);
            double mu = 0;
            for (std::int64_t l = 0; l < plane; ++l) mu += p[l];
            mu /= static_cast<double>(plane);
            double v = 0;
            for (std::int64_t l = 0; l < plane; ++l) {
                double d = p[l] - mu;
                v += d * d;
            }
            v /= static_cast<double>(plane);
            double iv = 1.0 / std::sqrt(v + eps);
            inv[static_cast<std::int64_t>(i) * c + ch] = iv;
            double* po = out.data() + out.idx4(i, ch, 0, 0);
            for (std::int64_t l = 0; l < plane; ++l) po[l] = (p[l] - mu) * iv;
        }
    auto xn = x.node();
    Tensor xhat = out;
    return make_op(std::move(out), {x}, [xn, xhat, inv, n, c, plane](Node& self) {
        if (!xn->requires_grad) return;
        Tensor gx(xhat.shape());
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double* gp = self.grad.data() + self.grad.idx4(i, ch, 0, 0);
                const double* xh = xhat.data() + xhat.idx4(i, ch, 0, 0);
                double* gxp = gx.data() + gx.idx4(i, ch, 0, 0);
                double iv = inv[static_cast<std::int64_t>(i) * c + ch];
                double sum_g = 0, sum_g_xh = 0;
                for (std::int64_t l = 0; l < plane; ++l) {
                    sum_g += gp[l];
                    sum_g_xh += gp[l] * xh[l];
                }
                for (std::int64_t l = 0; l < plane; ++l)
                    gxp[l] = iv / static_cast<double>(plane) *
                             (static_cast<double>(plane) * gp[l] - sum_g - xh[l] * sum_g_xh);
            }
        xn->accumulate(gx);
    });
}

/// Inverted dropout; identity in eval mode.
inline Var dropout(const Var& x, double p, bool training, RngStream& rng) {
    if (!training || p <= 0.0) return x;
    const Tensor& X = x.value();
    Tensor mask(X.shape());
    double keep = 1.0 - p;
    for (std::int64_t i = 0; i < mask.numel(); ++i)
        mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    Tensor out = X;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
    auto xn = x.node();
    return make_op(std::move(out), {x}, [xn, mask](Node& self) {
        if (!xn->requires_grad) return;
        Tensor g = self.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= mask[i];
        xn->accumulate(g);
    });
}

}  // namespace isgan

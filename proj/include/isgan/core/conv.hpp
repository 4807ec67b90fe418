#pragma once

#include <stdexcept>

#include "isgan/core/ops.hpp"

namespace isgan {

namespace detail {

// src: [C,H,W] (contiguous slice), dst: [C*kh*kw, Ho*Wo]
inline void im2col(const double* src, int C, int H, int W, int kh, int kw, int stride, int pad,
                   int Ho, int Wo, double* dst) {
    const std::int64_t cols = static_cast<std::int64_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                double* drow = dst + (static_cast<std::int64_t>(c) * kh * kw + ki * kw + kj) * cols;
                for (int ho = 0; ho < Ho; ++ho) {
                    int h = ho * stride - pad + ki;
                    for (int wo = 0; wo < Wo; ++wo) {
                        int w = wo * stride - pad + kj;
                        drow[ho * Wo + wo] =
                            (h >= 0 && h < H && w >= 0 && w < W)
                                ? src[(static_cast<std::int64_t>(c) * H + h) * W + w]
                                : 0.0;
                    }
                }
            }
        }
    }
}

// scatter-accumulate the col matrix back to [C,H,W]
inline void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                   int Ho, int Wo, double* dst) {
    const std::int64_t cols = static_cast<std::int64_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const double* srow = col + (static_cast<std::int64_t>(c) * kh * kw + ki * kw + kj) * cols;
                for (int ho = 0; ho < Ho; ++ho) {
                    int h = ho * stride - pad + ki;
                    if (h < 0 || h >= H) continue;
                    for (int wo = 0; wo < Wo; ++wo) {
                        int w = wo * stride - pad + kj;
                        if (w < 0 || w >= W) continue;
                        dst[(static_cast<std::int64_t>(c) * H + h) * W + w] += srow[ho * Wo + wo];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// x:[N,C,H,W], w:[O,C,kh,kw], b:[O] optional
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const Tensor& X = x.value();
    const Tensor& W = w.value();
    if (X.ndim() != 4 || W.ndim() != 4) throw std::invalid_argument("conv2d: rank");
    int n = X.dim(0), c = X.dim(1), h = X.dim(2), wd = X.dim(3);
    int o = W.dim(0), kh = W.dim(2), kw = W.dim(3);
    if (W.dim(1) != c) throw std::invalid_argument("conv2d: channel mismatch");
    // floor semantics: trailing rows/cols that do not fit a full window are dropped
    int ho = (h + 2 * pad - kh) / stride + 1;
    int wo = (wd + 2 * pad - kw) / stride + 1;
    if (h + 2 * pad < kh || wd + 2 * pad < kw)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    const int ckk = c * kh * kw;
    const std::int64_t cols = static_cast<std::int64_t>(ho) * wo;

    Tensor out({n, o, ho, wo});
    Tensor col({ckk, static_cast<int>(cols)});
    bool has_bias = b.defined();
    for (int i = 0; i < n; ++i) {
        detail::im2col(X.data() + X.idx4(i, 0, 0, 0), c, h, wd, kh, kw, stride, pad, ho, wo, col.data());
        MapM(out.data() + out.idx4(i, 0, 0, 0), o, cols).noalias() =
            MapCM(W.data(), o, ckk) * MapCM(col.data(), ckk, cols);
        if (has_bias)
            for (int ch = 0; ch < o; ++ch)
                for (std::int64_t l = 0; l < cols; ++l) out[out.idx4(i, ch, 0, 0) + l] += b.value()[ch];
    }

    auto xn = x.node();
    auto wn = w.node();
    NodePtr bn = has_bias ? b.node() : nullptr;
    std::vector<Var> parents = has_bias ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_op(std::move(out), parents,
                   [xn, wn, bn, n, c, h, wd, o, kh, kw, stride, pad, ho, wo, ckk, cols](Node& self) {
        const Tensor& Xv = xn->value;
        const Tensor& Wv = wn->value;
        Tensor gx, gw, col2, dcol;
        if (xn->requires_grad) gx = Tensor({n, c, h, wd});
        if (wn->requires_grad) gw = Tensor({o, ckk});
        col2 = Tensor({ckk, static_cast<int>(cols)});
        dcol = Tensor({ckk, static_cast<int>(cols)});
        for (int i = 0; i < n; ++i) {
            MapCM G(self.grad.data() + self.grad.idx4(i, 0, 0, 0), o, cols);
            if (wn->requires_grad) {
                detail::im2col(Xv.data() + Xv.idx4(i, 0, 0, 0), c, h, wd, kh, kw, stride, pad, ho, wo,
                               col2.data());
                MapM(gw.data(), o, ckk).noalias() += G * MapCM(col2.data(), ckk, cols).transpose();
            }
            if (xn->requires_grad) {
                MapM(dcol.data(), ckk, cols).noalias() = MapCM(Wv.data(), o, ckk).transpose() * G;
                detail::col2im(dcol.data(), c, h, wd, kh, kw, stride, pad, ho, wo,
                               gx.data() + gx.idx4(i, 0, 0, 0));
            }
        }
        if (xn->requires_grad) xn->accumulate(gx);
        if (wn->requires_grad) wn->accumulate(gw.reshaped({o, c, kh, kw}));
        if (bn && bn->requires_grad) {
            Tensor gb({o});
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < o; ++ch)
                    for (std::int64_t l = 0; l < cols; ++l)
                        gb[ch] += self.grad[self.grad.idx4(i, ch, 0, 0) + l];
            bn->accumulate(gb);
        }
    });
}

/// x:[N,C,H,W], w:[C,O,kh,kw], b:[O]; output [N,O,(H-1)s-2p+kh, (W-1)s-2p+kw]
inline Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const Tensor& X = x.value();
    const Tensor& W = w.value();
    if (X.ndim() != 4 || W.ndim() != 4) throw std::invalid_argument("conv_transpose2d: rank");
    int n = X.dim(0), c = X.dim(1), h = X.dim(2), wd = X.dim(3);
    int o = W.dim(1), kh = W.dim(2), kw = W.dim(3);
    if (W.dim(0) != c) throw std::invalid_argument("conv_transpose2d: channel mismatch");
    int ho = (h - 1) * stride - 2 * pad + kh;
    int wo = (wd - 1) * stride - 2 * pad + kw;
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv_transpose2d: degenerate output");
    const int okk = o * kh * kw;
    const std::int64_t cols = static_cast<std::int64_t>(h) * wd;

    Tensor out({n, o, ho, wo});
    Tensor colbuf({okk, static_cast<int>(cols)});
    bool has_bias = b.defined();
    for (int i = 0; i < n; ++i) {
        // cols = W^T[okk, c] * x_i[c, h*w]; out_i = col2im(cols)
        MapM(colbuf.data(), okk, cols).noalias() =
            MapCM(W.data(), c, okk).transpose() * MapCM(X.data() + X.idx4(i, 0, 0, 0), c, cols);
        detail::col2im(colbuf.data(), o, ho, wo, kh, kw, stride, pad, h, wd,
                       out.data() + out.idx4(i, 0, 0, 0));
        if (has_bias)
            for (int ch = 0; ch < o; ++ch)
                for (std::int64_t l = 0; l < static_cast<std::int64_t>(ho) * wo; ++l)
                    out[out.idx4(i, ch, 0, 0) + l] += b.value()[ch];
    }

    auto xn = x.node();
    auto wn = w.node();
    NodePtr bn = has_bias ? b.node() : nullptr;
    std::vector<Var> parents = has_bias ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_op(std::move(out), parents,
                   [xn, wn, bn, n, c, h, wd, o, kh, kw, stride, pad, ho, wo, okk, cols](Node& self) {
        const Tensor& Xv = xn->value;
        const Tensor& Wv = wn->value;
        Tensor gx, gw;
        if (xn->requires_grad) gx = Tensor({n, c, h, wd});
        if (wn->requires_grad) gw = Tensor({c, okk});
        Tensor dcol({okk, static_cast<int>(cols)});
        for (int i = 0; i < n; ++i) {
            detail::im2col(self.grad.data() + self.grad.idx4(i, 0, 0, 0), o, ho, wo, kh, kw, stride,
                           pad, h, wd, dcol.data());
            if (xn->requires_grad)
                MapM(gx.data() + gx.idx4(i, 0, 0, 0), c, cols).noalias() =
                    MapCM(Wv.data(), c, okk) * MapCM(dcol.data(), okk, cols);
            if (wn->requires_grad)
                MapM(gw.data(), c, okk).noalias() +=
                    MapCM(Xv.data() + Xv.idx4(i, 0, 0, 0), c, cols) *
                    MapCM(dcol.data(), okk, cols).transpose();
        }
        if (xn->requires_grad) xn->accumulate(gx);
        if (wn->requires_grad) wn->accumulate(gw.reshaped({c, o, kh, kw}));
        if (bn && bn->requires_grad) {
            Tensor gb({o});
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < o; ++ch)
                    for (std::int64_t l = 0; l < static_cast<std::int64_t>(ho) * wo; ++l)
                        gb[ch] += self.grad[self.grad.idx4(i, ch, 0, 0) + l];
            bn->accumulate(gb);
        }
    });
}

/// rows [h0,h1) of x:[N,C,H,W] -> [N,C,h1-h0,W]
inline Var slice_h(const Var& x, int h0, int h1) {
    const Tensor& X = x.value();
    if (X.ndim() != 4) throw std::invalid_argument("slice_h: rank");
    int n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3);
    if (h0 < 0 || h1 > h || h0 >= h1) throw std::invalid_argument("slice_h: bad range");
    if (h0 == 0 && h1 == h) return x;
    int hs = h1 - h0;
    Tensor out({n, c, hs, w});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            std::copy(X.data() + X.idx4(i, ch, h0, 0), X.data() + X.idx4(i, ch, h1, 0),
                      out.data() + out.idx4(i, ch, 0, 0));
    auto xn = x.node();
    std::vector<int> orig = X.shape();
    return make_op(std::move(out), {x}, [xn, orig, n, c, h0, hs, w](Node& self) {
        if (!xn->requires_grad) return;
        Tensor g(orig);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < hs; ++y)
                    for (int xx = 0; xx < w; ++xx)
                        g[g.idx4(i, ch, h0 + y, xx)] = self.grad[self.grad.idx4(i, ch, y, xx)];
        xn->accumulate(g);
    });
}

/// max over rows [h0,h1) and all columns of x:[N,C,H,W] -> [N,C]
inline Var max_pool_region(const Var& x, int h0, int h1) {
    const Tensor& X = x.value();
    if (X.ndim() != 4) throw std::invalid_argument("max_pool_region: rank");
    int n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3);
    if (h0 < 0 || h1 > h || h0 >= h1) throw std::invalid_argument("max_pool_region: bad region");
    Tensor out({n, c});
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(n) * c);
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            double best = -std::numeric_limits<double>::infinity();
            std::int64_t bi = -1;
            for (int hh = h0; hh < h1; ++hh) {
                for (int ww = 0; ww < w; ++ww) {
                    std::int64_t idx = X.idx4(i, ch, hh, ww);
                    if (X[idx] > best) {
                        best = X[idx];
                        bi = idx;
                    }
                }
            }
            out[static_cast<std::int64_t>(i) * c + ch] = best;
            argmax[static_cast<std::size_t>(i) * c + ch] = bi;
        }
    }
    auto xn = x.node();
    std::vector<int> orig = X.shape();
    return make_op(std::move(out), {x}, [xn, argmax, orig, n, c](Node& self) {
        if (!xn->requires_grad) return;
        Tensor g(orig);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                g[argmax[static_cast<std::size_t>(i) * c + ch]] +=
                    self.grad[static_cast<std::int64_t>(i) * c + ch];
        xn->accumulate(g);
    });
}

}  // namespace isgan

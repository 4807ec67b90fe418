#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "isgan/core/autograd.hpp"

namespace isgan {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

namespace detail {
inline void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.value().shape_string() + " vs " + b.value().shape_string());
}
}  // namespace detail

inline Var add(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "add");
    Tensor out = a.value();
    out.add_(b.value());
    auto an = a.node();
    auto bn = b.node();
    return make_op(std::move(out), {a, b}, [an, bn](Node& self) {
        if (an->requires_grad) an->accumulate(self.grad);
        if (bn->requires_grad) bn->accumulate(self.grad);
    });
}

inline Var sub(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor out = a.value();
    out.axpy_(-1.0, b.value());
    auto an = a.node();
    auto bn = b.node();
    return make_op(std::move(out), {a, b}, [an, bn](Node& self) {
        if (an->requires_grad) an->accumulate(self.grad);
        if (bn->requires_grad) {
            Tensor g = self.grad;
            g.scale_(-1.0);
            bn->accumulate(g);
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "mul");
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
    auto an = a.node();
    auto bn = b.node();
    Tensor av = a.value(), bv = b.value();
    return make_op(std::move(out), {a, b}, [an, bn, av, bv](Node& self) {
        if (an->requires_grad) {
            Tensor g = self.grad;
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= bv[i];
            an->accumulate(g);
        }
        if (bn->requires_grad) {
            Tensor g = self.grad;
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= av[i];
            bn->accumulate(g);
        }
    });
}

inline Var scale(const Var& a, double s) {
    Tensor out = a.value();
    out.scale_(s);
    auto an = a.node();
    return make_op(std::move(out), {a}, [an, s](Node& self) {
        if (!an->requires_grad) return;
        Tensor g = self.grad;
        g.scale_(s);
        an->accumulate(g);
    });
}

inline Var offset(const Var& a, double s) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += s;
    auto an = a.node();
    return make_op(std::move(out), {a}, [an](Node& self) {
        if (an->requires_grad) an->accumulate(self.grad);
    });
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

inline Var vabs(const Var& a) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
    auto an = a.node();
    Tensor av = a.value();
    return make_op(std::move(out), {a}, [an, av](Node& self) {
        if (!an->requires_grad) return;
        Tensor g = self.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            g[i] *= (av[i] > 0.0) ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
        an->accumulate(g);
    });
}

inline Var vexp(const Var& a) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
    auto an = a.node();
    Tensor ov = out;
    return make_op(std::move(out), {a}, [an, ov](Node& self) {
        if (!an->requires_grad) return;
        Tensor g = self.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= ov[i];
        an->accumulate(g);
    });
}

/// log(max(x, floor)); zero gradient where the floor is active
inline Var vlog(const Var& a, double floor = 1e-12) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(std::max(out[i], floor));
    auto an = a.node();
    Tensor av = a.value();
    return make_op(std::move(out), {a}, [an, av, floor](Node& self) {
        if (!an->requires_grad) return;
        Tensor g = self.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            g[i] = (av[i] > floor) ? g[i] / av[i] : 0.0;
        an->accumulate(g);
    });
}

inline Var vtanh(const Var& a) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    auto an = a.node();
    Tensor ov = out;
    return make_op(std::move(out), {a}, [an, ov](Node& self) {
        if (!an->requires_grad) return;
        Tensor g = self.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= 1.0 - ov[i] * ov[i];
        an->accumulate(g);
    });
}

inline Var vsigmoid(const Var& a) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    auto an = a.node();
    Tensor ov = out;
    return make_op(std::move(out), {a}, [an, ov](Node& self) {
        if (!an->requires_grad) return;
        Tensor g = self.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= ov[i] * (1.0 - ov[i]);
        an->accumulate(g);
    });
}

inline Var leaky_relu(const Var& a, double slope = 0.2) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i)
        if (out[i] < 0.0) out[i] *= slope;
    auto an = a.node();
    Tensor av = a.value();
    return make_op(std::move(out), {a}, [an, av, slope](Node& self) {
        if (!an->requires_grad) return;
        Tensor g = self.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (av[i] < 0.0) g[i] *= slope;
        an->accumulate(g);
    });
}

/// min(max(x, lo), hi) with pass-through gradient strictly inside the range
inline Var clamp(const Var& a, double lo, double hi) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::min(std::max(out[i], lo), hi);
    auto an = a.node();
    Tensor av = a.value();
    return make_op(std::move(out), {a}, [an, av, lo, hi](Node& self) {
        if (!an->requires_grad) return;
        Tensor g = self.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (av[i] < lo || av[i] > hi) g[i] = 0.0;
        an->accumulate(g);
    });
}

inline Var sum(const Var& a) {
    Tensor out = Tensor::scalar(a.value().sum());
    auto an = a.node();
    std::vector<int> shape = a.value().shape();
    return make_op(std::move(out), {a}, [an, shape](Node& self) {
        if (!an->requires_grad) return;
        Tensor g(shape, self.grad[0]);
        an->accumulate(g);
    });
}

inline Var mean(const Var& a) {
    std::int64_t n = a.value().numel();
    if (n == 0) throw std::invalid_argument("mean: empty tensor");
    Tensor out = Tensor::scalar(a.value().sum() / static_cast<double>(n));
    auto an = a.node();
    std::vector<int> shape = a.value().shape();
    return make_op(std::move(out), {a}, [an, shape, n](Node& self) {
        if (!an->requires_grad) return;
        Tensor g(shape, self.grad[0] / static_cast<double>(n));
        an->accumulate(g);
    });
}

/// [N, ...] -> [N], mean over everything but the leading axis
inline Var per_sample_mean(const Var& a) {
    const Tensor& x = a.value();
    int n = x.dim(0);
    std::int64_t m = x.numel() / n;
    Tensor out({n});
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (std::int64_t j = 0; j < m; ++j) s += x[i * m + j];
        out[i] = s / static_cast<double>(m);
    }
    auto an = a.node();
    std::vector<int> shape = x.shape();
    return make_op(std::move(out), {a}, [an, shape, n, m](Node& self) {
        if (!an->requires_grad) return;
        Tensor g(shape);
        for (int i = 0; i < n; ++i) {
            double v = self.grad[i] / static_cast<double>(m);
            for (std::int64_t j = 0; j < m; ++j) g[i * m + j] = v;
        }
        an->accumulate(g);
    });
}

/// [N, ...] -> [N], sum over everything but the leading axis
inline Var per_sample_sum(const Var& a) {
    const Tensor& x = a.value();
    int n = x.dim(0);
    std::int64_t m = x.numel() / n;
    Tensor out({n});
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (std::int64_t j = 0; j < m; ++j) s += x[i * m + j];
        out[i] = s;
    }
    auto an = a.node();
    std::vector<int> shape = x.shape();
    return make_op(std::move(out), {a}, [an, shape, n, m](Node& self) {
        if (!an->requires_grad) return;
        Tensor g(shape);
        for (int i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < m; ++j) g[i * m + j] = self.grad[i];
        an->accumulate(g);
    });
}

inline Var reshape(const Var& a, std::vector<int> shape) {
    Tensor out = a.value().reshaped(shape);
    auto an = a.node();
    std::vector<int> orig = a.value().shape();
    return make_op(std::move(out), {a}, [an, orig](Node& self) {
        if (an->requires_grad) an->accumulate(self.grad.reshaped(orig));
    });
}

/// concat along axis 0 (rows / batch)
inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    std::vector<int> shape = parts[0].value().shape();
    std::int64_t inner = parts[0].value().numel() / shape[0];
    int total = 0;
    for (const auto& p : parts) {
        const auto& s = p.value().shape();
        if (s.size() != shape.size()) throw std::invalid_argument("concat_rows: rank mismatch");
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] != shape[i]) throw std::invalid_argument("concat_rows: inner shape mismatch");
        total += s[0];
    }
    shape[0] = total;
    Tensor out(shape);
    std::int64_t off = 0;
    std::vector<std::int64_t> sizes;
    for (const auto& p : parts) {
        std::int64_t sz = p.value().numel();
        std::copy(p.value().data(), p.value().data() + sz, out.data() + off);
        sizes.push_back(sz);
        off += sz;
    }
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_op(std::move(out), parts, [nodes, sizes, parts, inner](Node& self) {
        std::int64_t off2 = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (nodes[k]->requires_grad) {
                Tensor g(parts[k].value().shape());
                std::copy(self.grad.data() + off2, self.grad.data() + off2 + sizes[k], g.data());
                nodes[k]->accumulate(g);
            }
            off2 += sizes[k];
        }
        (void)inner;
    });
}

/// concat along axis 1 of 2-D tensors: [N, Di] -> [N, sum Di]
inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    int n = parts[0].value().dim(0);
    int total = 0;
    for (const auto& p : parts) {
        if (p.value().ndim() != 2 || p.value().dim(0) != n)
            throw std::invalid_argument("concat_cols: expects [N,D] with equal N");
        total += p.value().dim(1);
    }
    Tensor out({n, total});
    int off = 0;
    std::vector<int> widths;
    for (const auto& p : parts) {
        int d = p.value().dim(1);
        for (int r = 0; r < n; ++r)
            std::copy(p.value().data() + static_cast<std::int64_t>(r) * d,
                      p.value().data() + static_cast<std::int64_t>(r) * d + d,
                      out.data() + static_cast<std::int64_t>(r) * total + off);
        widths.push_back(d);
        off += d;
    }
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_op(std::move(out), parts, [nodes, widths, n, total](Node& self) {
        int off2 = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            int d = widths[k];
            if (nodes[k]->requires_grad) {
                Tensor g({n, d});
                for (int r = 0; r < n; ++r)
                    std::copy(self.grad.data() + static_cast<std::int64_t>(r) * total + off2,
                              self.grad.data() + static_cast<std::int64_t>(r) * total + off2 + d,
                              g.data() + static_cast<std::int64_t>(r) * d);
                nodes[k]->accumulate(g);
            }
            off2 += d;
        }
    });
}

/// gather rows of an [N, ...] tensor; backward scatter-adds
inline Var select_rows(const Var& a, const std::vector<int>& rows) {
    const Tensor& x = a.value();
    int n = x.dim(0);
    std::int64_t m = x.numel() / n;
    std::vector<int> shape = x.shape();
    shape[0] = static_cast<int>(rows.size());
    Tensor out(shape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= n) throw std::out_of_range("select_rows: index");
        std::copy(x.data() + rows[i] * m, x.data() + (rows[i] + 1) * m,
                  out.data() + static_cast<std::int64_t>(i) * m);
    }
    auto an = a.node();
    std::vector<int> orig = x.shape();
    return make_op(std::move(out), {a}, [an, rows, orig, m](Node& self) {
        if (!an->requires_grad) return;
        Tensor g(orig);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::int64_t j = 0; j < m; ++j)
                g[rows[i] * m + j] += self.grad[static_cast<std::int64_t>(i) * m + j];
        an->accumulate(g);
    });
}

inline Var matmul(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.ndim() != 2 || B.ndim() != 2 || A.dim(1) != B.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes");
    int m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor out({m, n});
    MapM(out.data(), m, n).noalias() = MapCM(A.data(), m, k) * MapCM(B.data(), k, n);
    auto an = a.node();
    auto bn = b.node();
    Tensor Av = A, Bv = B;
    return make_op(std::move(out), {a, b}, [an, bn, Av, Bv, m, k, n](Node& self) {
        MapCM G(self.grad.data(), m, n);
        if (an->requires_grad) {
            Tensor ga({m, k});
            MapM(ga.data(), m, k).noalias() = G * MapCM(Bv.data(), k, n).transpose();
            an->accumulate(ga);
        }
        if (bn->requires_grad) {
            Tensor gb({k, n});
            MapM(gb.data(), k, n).noalias() = MapCM(Av.data(), m, k).transpose() * G;
            bn->accumulate(gb);
        }
    });
}

/// y = x * W^T + b  with x:[N,D], W:[O,D], b:[O] (b optional)
inline Var linear(const Var& x, const Var& w, const Var& b = Var()) {
    const Tensor& X = x.value();
    const Tensor& W = w.value();
    if (X.ndim() != 2 || W.ndim() != 2 || X.dim(1) != W.dim(1))
        throw std::invalid_argument("linear: incompatible shapes");
    int n = X.dim(0), d = X.dim(1), o = W.dim(0);
    Tensor out({n, o});
    MapM(out.data(), n, o).noalias() = MapCM(X.data(), n, d) * MapCM(W.data(), o, d).transpose();
    bool has_bias = b.defined();
    if (has_bias) {
        if (b.value().numel() != o) throw std::invalid_argument("linear: bias size");
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < o; ++c) out[static_cast<std::int64_t>(r) * o + c] += b.value()[c];
    }
    auto xn = x.node();
    auto wn = w.node();
    NodePtr bnode = has_bias ? b.node() : nullptr;
    Tensor Xv = X, Wv = W;
    std::vector<Var> parents = has_bias ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_op(std::move(out), parents, [xn, wn, bnode, Xv, Wv, n, d, o](Node& self) {
        MapCM G(self.grad.data(), n, o);
        if (xn->requires_grad) {
            Tensor gx({n, d});
            MapM(gx.data(), n, d).noalias() = G * MapCM(Wv.data(), o, d);
            xn->accumulate(gx);
        }
        if (wn->requires_grad) {
            Tensor gw({o, d});
            MapM(gw.data(), o, d).noalias() = G.transpose() * MapCM(Xv.data(), n, d);
            wn->accumulate(gw);
        }
        if (bnode && bnode->requires_grad) {
            Tensor gb({o});
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < o; ++c) gb[c] += self.grad[static_cast<std::int64_t>(r) * o + c];
            bnode->accumulate(gb);
        }
    });
}

/// Per-row cross entropy with label smoothing: targets put 1-eps on the true
/// class and eps/(C-1) elsewhere. Returns [N].
inline Var cross_entropy_rows(const Var& logits, const std::vector<int>& labels, double eps_ls = 0.0) {
    const Tensor& L = logits.value();
    if (L.ndim() != 2) throw std::invalid_argument("cross_entropy_rows: logits must be [N,C]");
    int n = L.dim(0), c = L.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("cross_entropy_rows: label count");
    if (c < 2 && eps_ls > 0.0)
        throw std::invalid_argument("cross_entropy_rows: smoothing needs C >= 2");
    Tensor probs({n, c});
    Tensor out({n});
    for (int i = 0; i < n; ++i) {
        int y = labels[i];
        if (y < 0 || y >= c) throw std::out_of_range("cross_entropy_rows: label out of range");
        const double* row = L.data() + static_cast<std::int64_t>(i) * c;
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double lse = 0.0;
        for (int j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
        lse = mx + std::log(lse);
        double off = eps_ls / (c > 1 ? (c - 1) : 1);
        double loss = 0.0;
        for (int j = 0; j < c; ++j) {
            double q = (j == y) ? (1.0 - eps_ls) : off;
            probs[static_cast<std::int64_t>(i) * c + j] = std::exp(row[j] - lse);
            loss += q * (lse - row[j]);
        }
        out[i] = loss;
    }
    auto ln = logits.node();
    return make_op(std::move(out), {logits}, [ln, probs, labels, eps_ls, n, c](Node& self) {
        if (!ln->requires_grad) return;
        Tensor g({n, c});
        double off = eps_ls / (c > 1 ? (c - 1) : 1);
        for (int i = 0; i < n; ++i) {
            double up = self.grad[i];
            for (int j = 0; j < c; ++j) {
                double q = (j == labels[i]) ? (1.0 - eps_ls) : off;
                g[static_cast<std::int64_t>(i) * c + j] =
                    up * (probs[static_cast<std::int64_t>(i) * c + j] - q);
            }
        }
        ln->accumulate(g);
    });
}

/// (x - mean) / std column-wise with constant statistics; x:[N,p]
inline Var standardize_cols(const Var& x, const Tensor& mean_c, const Tensor& std_c) {
    const Tensor& X = x.value();
    if (X.ndim() != 2) throw std::invalid_argument("standardize_cols: expects [N,p]");
    int n = X.dim(0), p = X.dim(1);
    if (mean_c.numel() != p || std_c.numel() != p)
        throw std::invalid_argument("standardize_cols: stats size");
    Tensor out({n, p});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j)
            out[static_cast<std::int64_t>(i) * p + j] =
                (X[static_cast<std::int64_t>(i) * p + j] - mean_c[j]) / std_c[j];
    auto xn = x.node();
    Tensor stdv = std_c;
    return make_op(std::move(out), {x}, [xn, stdv, n, p](Node& self) {
        if (!xn->requires_grad) return;
        Tensor g({n, p});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j)
                g[static_cast<std::int64_t>(i) * p + j] =
                    self.grad[static_cast<std::int64_t>(i) * p + j] / stdv[j];
        xn->accumulate(g);
    });
}

/// Evaluation-only stable softmax over rows (no graph).
inline Tensor softmax_tensor(const Tensor& logits) {
    if (logits.ndim() != 2) throw std::invalid_argument("softmax_tensor: expects [N,C]");
    int n = logits.dim(0), c = logits.dim(1);
    Tensor out({n, c});
    for (int i = 0; i < n; ++i) {
        const double* row = logits.data() + static_cast<std::int64_t>(i) * c;
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        for (int j = 0; j < c; ++j) out[static_cast<std::int64_t>(i) * c + j] = std::exp(row[j] - mx) / z;
    }
    return out;
}

}  // namespace isgan

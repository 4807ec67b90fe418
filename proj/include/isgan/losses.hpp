#pragma once

#include <array>
#include <map>

#include "isgan/disentangle.hpp"
#include "isgan/model/config.hpp"

namespace isgan::losses {

using model::PartSet;
using model::Variant;

/// Stable softmax probability of class c (plain scalar path).
inline double softmax_prob(const std::vector<double>& logits, int c) {
    if (logits.empty() || c < 0 || c >= static_cast<int>(logits.size()))
        throw std::out_of_range("softmax_prob: class index");
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0;
    for (double v : logits) z += std::exp(v - mx);
    return std::exp(logits[static_cast<std::size_t>(c)] - mx) / z;
}

/// Identity-related classification loss: per image, the sum over the K parts
/// of the (optionally label-smoothed) cross entropy; averaged over the batch.
inline Var identity_loss(const std::vector<Var>& part_logits, const std::vector<int>& labels,
                         double label_smoothing = 0.0) {
    if (part_logits.empty()) throw std::invalid_argument("identity_loss: no part logits");
    Var total;
    for (const auto& logits : part_logits) {
        Var ce = mean(cross_entropy_rows(logits, labels, label_smoothing));
        total = total.defined() ? add(total, ce) : ce;
    }
    return total;
}

/// Mean absolute error of one reconstruction term, normalized per pixel and
/// channel so loss weights keep their meaning across resolutions.
inline Var l1_recon(const Var& generated, const Tensor& target) {
    if (generated.value().numel() != target.numel())
        throw std::invalid_argument("l1_recon: size mismatch");
    Var t = Var::leaf(target.reshaped(generated.value().shape()));
    return mean(vabs(sub(generated, t)));
}

enum class PairMode { Same, Swapped, All };

/// Generated images of one anchor/positive pair; g_ij reconstructs I_i from
/// phi_R(I_j) + phi_U(I_i).
struct Eq3Generations {
    Var g_aa, g_ap, g_pa, g_pp;
};

/// Identity-shuffling loss: the four (i,j) reconstruction terms, each a
/// per-pixel mean, summed. `mode` selects the i=j terms, the i!=j terms, or
/// all four.
inline Var shuffle_recon_loss(const Eq3Generations& g, const Tensor& anchor, const Tensor& positive,
                              PairMode mode = PairMode::All) {
    std::vector<Var> terms;
    if (mode != PairMode::Swapped) {
        terms.push_back(l1_recon(g.g_aa, anchor));
        terms.push_back(l1_recon(g.g_pp, positive));
    }
    if (mode != PairMode::Same) {
        terms.push_back(l1_recon(g.g_ap, anchor));
        terms.push_back(l1_recon(g.g_pa, positive));
    }
    Var total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    return total;
}

/// Part-level shuffling loss: two ordered-pair terms (i != j), where the
/// generator input carried part-shuffled identity-related features.
inline Var part_shuffle_loss(const Var& g_anchor, const Var& g_positive, const Tensor& anchor,
                             const Tensor& positive) {
    return add(l1_recon(g_anchor, anchor), l1_recon(g_positive, positive));
}

/// KL divergence of per-part diagonal Gaussians to N(0, I):
/// sum_k sum_dim 0.5 (mu^2 + e^logvar - logvar - 1), averaged over the batch.
inline Var kl_unrelated_loss(const std::vector<std::pair<Var, Var>>& mean_logvar) {
    if (mean_logvar.empty()) throw std::invalid_argument("kl_unrelated_loss: empty");
    Var total;
    for (const auto& [mu, lv] : mean_logvar) {
        Var term = offset(sub(add(mul(mu, mu), vexp(lv)), lv), -1.0);
        Var per_image = scale(per_sample_sum(term), 0.5);
        total = total.defined() ? add(total, mean(per_image)) : mean(per_image);
    }
    return total;
}

/// Moving mean / moving std per part and stream, used to standardize the
/// non-stationary feature streams for the decorrelation loss. Gradients do
/// not flow through these statistics.
struct MovingStats {
    int num_parts = 0;
    int dim = 0;
    double momentum = 0.1;
    double std_floor = 1e-5;
    bool initialized = false;
    std::vector<Tensor> mean_r, std_r, mean_u, std_u;

    MovingStats() = default;
    MovingStats(int parts, int p, double m = 0.1, double floor = 1e-5)
        : num_parts(parts), dim(p), momentum(m), std_floor(floor) {
        for (int k = 0; k < parts; ++k) {
            mean_r.emplace_back(Tensor({p}));
            std_r.emplace_back(Tensor({p}, 1.0));
            mean_u.emplace_back(Tensor({p}));
            std_u.emplace_back(Tensor({p}, 1.0));
        }
    }

    void export_state(const std::string& prefix, std::map<std::string, Tensor>& out) const {
        out[prefix + ".initialized"] = Tensor::scalar(initialized ? 1.0 : 0.0);
        for (int k = 0; k < num_parts; ++k) {
            std::string kp = prefix + ".k" + std::to_string(k);
            out[kp + ".mean_r"] = mean_r[static_cast<std::size_t>(k)];
            out[kp + ".std_r"] = std_r[static_cast<std::size_t>(k)];
            out[kp + ".mean_u"] = mean_u[static_cast<std::size_t>(k)];
            out[kp + ".std_u"] = std_u[static_cast<std::size_t>(k)];
        }
    }
    void import_state(const std::string& prefix, const std::map<std::string, Tensor>& in) {
        initialized = in.at(prefix + ".initialized")[0] != 0.0;
        for (int k = 0; k < num_parts; ++k) {
            std::string kp = prefix + ".k" + std::to_string(k);
            mean_r[static_cast<std::size_t>(k)] = in.at(kp + ".mean_r");
            std_r[static_cast<std::size_t>(k)] = in.at(kp + ".std_r");
            mean_u[static_cast<std::size_t>(k)] = in.at(kp + ".mean_u");
            std_u[static_cast<std::size_t>(k)] = in.at(kp + ".std_u");
        }
    }
};

namespace detail {
inline void batch_mean_std(const Tensor& x, Tensor& mu, Tensor& sd) {
    int n = x.dim(0), p = x.dim(1);
    mu = Tensor({p});
    sd = Tensor({p});
    for (int j = 0; j < p; ++j) {
        double s = 0;
        for (int i = 0; i < n; ++i) s += x[x.idx2(i, j)];
        mu[j] = s / n;
        double v = 0;
        for (int i = 0; i < n; ++i) {
            double d = x[x.idx2(i, j)] - mu[j];
            v += d * d;
        }
        sd[j] = std::sqrt(v / n);
    }
}
}  // namespace detail

/// First call adopts the batch statistics; later calls blend with momentum m:
/// stat <- (1-m) stat + m batch_stat. Stds are floored.
inline void update_moving_stats(MovingStats& stats, const std::vector<Tensor>& r_parts,
                                const std::vector<Tensor>& u_parts) {
    if (static_cast<int>(r_parts.size()) != stats.num_parts ||
        static_cast<int>(u_parts.size()) != stats.num_parts)
        throw std::invalid_argument("update_moving_stats: part count mismatch");
    for (int k = 0; k < stats.num_parts; ++k) {
        Tensor mu, sd;
        auto blend = [&](Tensor& target_mean, Tensor& target_std, const Tensor& feats) {
            detail::batch_mean_std(feats, mu, sd);
            for (int j = 0; j < stats.dim; ++j) {
                if (!stats.initialized) {
                    target_mean[j] = mu[j];
                    target_std[j] = sd[j];
                } else {
                    target_mean[j] = (1.0 - stats.momentum) * target_mean[j] + stats.momentum * mu[j];
                    target_std[j] = (1.0 - stats.momentum) * target_std[j] + stats.momentum * sd[j];
                }
                target_std[j] = std::max(target_std[j], stats.std_floor);
            }
        };
        blend(stats.mean_r[static_cast<std::size_t>(k)], stats.std_r[static_cast<std::size_t>(k)],
              r_parts[static_cast<std::size_t>(k)].ndim() == 2
                  ? r_parts[static_cast<std::size_t>(k)]
                  : r_parts[static_cast<std::size_t>(k)].reshaped({1, stats.dim}));
        blend(stats.mean_u[static_cast<std::size_t>(k)], stats.std_u[static_cast<std::size_t>(k)],
              u_parts[static_cast<std::size_t>(k)].ndim() == 2
                  ? u_parts[static_cast<std::size_t>(k)]
                  : u_parts[static_cast<std::size_t>(k)].reshaped({1, stats.dim}));
    }
}

inline std::vector<Tensor> part_values(const PartSet& s) {
    std::vector<Tensor> out;
    out.reserve(s.parts.size());
    for (const auto& p : s.parts) out.push_back(p.value());
    return out;
}

/// Decorrelation loss (DC variant): per part k, the batch/dim mean of the
/// moving-standardized product of phi_R and phi_U. By default the absolute
/// correlation |rho_k| is minimized; `abs_mode=false` keeps the raw signed
/// form for comparison. The first batch only initializes the statistics and
/// contributes zero.
inline Var decorrelation_loss(const PartSet& phi_r, const PartSet& phi_u, MovingStats& stats,
                              bool abs_mode = true) {
    if (static_cast<int>(phi_r.parts.size()) != stats.num_parts)
        throw std::invalid_argument("decorrelation_loss: part count mismatch");
    if (!stats.initialized) {
        update_moving_stats(stats, part_values(phi_r), part_values(phi_u));
        stats.initialized = true;
        return Var::leaf(Tensor::scalar(0.0));
    }
    Var total;
    for (int k = 0; k < stats.num_parts; ++k) {
        auto ku = static_cast<std::size_t>(k);
        Var zr = standardize_cols(phi_r.parts[ku], stats.mean_r[ku], stats.std_r[ku]);
        Var zu = standardize_cols(phi_u.parts[ku], stats.mean_u[ku], stats.std_u[ku]);
        Var rho = mean(mul(zr, zu));
        Var term = abs_mode ? vabs(rho) : rho;
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

/// Patch logits [N,1,h,w] -> one probability per image (mean of the
/// patch-wise sigmoid outputs).
inline Var patch_prob(const Var& patch_logits) {
    if (patch_logits.value().ndim() != 4 || patch_logits.value().dim(1) != 1)
        throw std::invalid_argument("patch_prob: expects [N,1,h,w]");
    return per_sample_mean(vsigmoid(patch_logits));
}

struct DomainLossOut {
    Var value;           // the Eq. 9 log-likelihood (maximized by D_D)
    Var generator_term;  // non-saturating -log D(fake) over the six fakes
};

/// Domain loss over one pair: 2 real images, 4 reconstruction terms, 2
/// part-shuffled terms, each already reduced to a probability.
inline DomainLossOut domain_loss(const Var& real_probs, const Var& recon_probs, const Var& ps_probs) {
    if (real_probs.value().numel() != 2 || recon_probs.value().numel() != 4 ||
        ps_probs.value().numel() != 2)
        throw std::invalid_argument("domain_loss: expects 2 real, 4 recon, 2 part-shuffled terms");
    Var fake = concat_rows({recon_probs, ps_probs});
    DomainLossOut out;
    out.value = add(sum(vlog(real_probs)), sum(vlog(offset(neg(fake), 1.0))));
    out.generator_term = neg(sum(vlog(fake)));
    return out;
}

/// Class loss over one pair: cross entropy against the shared identity for
/// the 2 real, 4 reconstruction and 2 part-shuffled terms.
inline Var class_loss(const Var& real_logits, const Var& recon_logits, const Var& ps_logits, int label,
                      double label_smoothing = 0.0) {
    if (real_logits.value().dim(0) != 2 || recon_logits.value().dim(0) != 4 ||
        ps_logits.value().dim(0) != 2)
        throw std::invalid_argument("class_loss: expects 2 real, 4 recon, 2 part-shuffled terms");
    Var all = concat_rows({real_logits, recon_logits, ps_logits});
    return sum(cross_entropy_rows(all, std::vector<int>(8, label), label_smoothing));
}

/// Loss weights of the total objective, with the stage-dependent KL schedule.
struct LossWeights {
    double lambda_R = 20.0;
    double lambda_S = 10.0;
    double lambda_PS = 10.0;
    double lambda_D = 1.0;
    double lambda_C = 2.0;
    double lambda_U_dc = 1.0;
    double lambda_U_kl_stage2 = 1e-3;
    double lambda_U_kl_stage3 = 1e-2;
    bool decorrelation_abs = true;

    void validate() const {
        for (double v : {lambda_R, lambda_S, lambda_PS, lambda_D, lambda_C, lambda_U_dc,
                         lambda_U_kl_stage2, lambda_U_kl_stage3}) {
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("loss weights must be finite and non-negative");
        }
    }

    double lambda_U(Variant variant, int stage) const {
        if (variant == Variant::DC) return lambda_U_dc;
        return stage >= 3 ? lambda_U_kl_stage3 : lambda_U_kl_stage2;
    }

    double weight_of(const std::string& name, Variant variant, int stage) const {
        if (name == "R") return lambda_R;
        if (name == "U") return lambda_U(variant, stage);
        if (name == "S") return lambda_S;
        if (name == "PS") return lambda_PS;
        if (name == "D") return lambda_D;
        if (name == "C") return lambda_C;
        throw std::invalid_argument("unknown loss component: " + name);
    }
};

inline bool component_active(const std::string& name, int stage) {
    switch (stage) {
        case 1: return name == "R";
        case 2: return name != "R";
        case 3: return true;
        default: throw std::invalid_argument("stage must be 1, 2 or 3");
    }
}

struct LossBreakdown {
    std::vector<std::pair<std::string, double>> components;  // weighted values
    double total = 0.0;
};

/// Weighted, stage-gated sum. Components are keyed R, U, S, PS, D, C;
/// inactive components are ignored.
inline Var total_loss(const std::vector<std::pair<std::string, Var>>& components,
                      const LossWeights& weights, Variant variant, int stage,
                      LossBreakdown* breakdown = nullptr) {
    weights.validate();
    Var total;
    if (breakdown) *breakdown = LossBreakdown{};
    for (const auto& [name, value] : components) {
        double w = weights.weight_of(name, variant, stage);
        if (!component_active(name, stage)) continue;
        Var term = scale(value, w);
        if (breakdown) breakdown->components.emplace_back(name, term.value()[0]);
        total = total.defined() ? add(total, term) : term;
    }
    if (!total.defined()) total = Var::leaf(Tensor::scalar(0.0));
    if (breakdown) breakdown->total = total.value()[0];
    return total;
}

}  // namespace isgan::losses

#pragma once

#include <functional>
#include <map>
#include <set>

#include "isgan/core/serialize.hpp"
#include "isgan/model/nets.hpp"

namespace isgan::model {

enum class Component { Backbone, EncoderR, Classifier, EncoderU, Generator, DiscDomain, DiscClass };

inline const char* component_name(Component c) {
    switch (c) {
        case Component::Backbone: return "backbone";
        case Component::EncoderR: return "encoder_r";
        case Component::Classifier: return "classifier";
        case Component::EncoderU: return "encoder_u";
        case Component::Generator: return "generator";
        case Component::DiscDomain: return "disc_domain";
        case Component::DiscClass: return "disc_class";
    }
    return "?";
}

inline const std::vector<Component>& all_components() {
    static const std::vector<Component> v = {
        Component::Backbone,  Component::EncoderR,  Component::Classifier, Component::EncoderU,
        Component::Generator, Component::DiscDomain, Component::DiscClass};
    return v;
}

/// Result of the identity-unrelated encoder: sampled parts, plus per-part
/// (mean, log-variance) for the KL variant.
struct UnrelatedOut {
    PartSet parts;
    std::vector<std::pair<Var, Var>> kl_params;  // empty for the DC variant
};

/// The five learnable components plus the per-part classifier bank, built to
/// one ModelConfig. Initialization is a pure function of the seed.
class ModelBundle {
public:
    ModelBundle() = default;

    ModelBundle(const ModelConfig& cfg, int num_classes, std::uint64_t seed)
        : cfg_(cfg), num_classes_(num_classes) {
        cfg_.validate();
        RngStream rng = RngStream(seed).derive_str("model-init");
        backbone_ = Backbone(cfg_, rng.derive_str("backbone"));
        int bc = cfg_.backbone_channels.back();
        auto parts = cfg_.layout.parts();
        for (std::size_t bi = 0; bi < cfg_.layout.branches.size(); ++bi) {
            er_heads_.emplace_back(bc, cfg_.head_channels, cfg_.head_kernel, cfg_.layout.per_part_dim,
                                   rng.derive_str("er").derive(bi));
            eu_heads_.emplace_back(bc, cfg_.head_channels, cfg_.head_kernel, cfg_.layout.per_part_dim,
                                   rng.derive_str("eu").derive(bi));
            if (cfg_.variant == Variant::KL)
                kl_heads_.emplace_back(cfg_.head_channels, cfg_.layout.per_part_dim,
                                       rng.derive_str("kl").derive(bi));
        }
        for (int k = 0; k < cfg_.layout.num_parts(); ++k)
            classifier_.emplace_back(cfg_.layout.per_part_dim, num_classes_, false,
                                     rng.derive_str("cls").derive(k));
        (void)parts;
        generator_ = Generator(cfg_, num_classes_, rng.derive_str("gen"));
        disc_domain_ = DomainDiscriminator(cfg_, rng.derive_str("dd"));
        disc_class_ = ClassDiscriminator(cfg_, num_classes_, rng.derive_str("dc"));
    }

    const ModelConfig& config() const { return cfg_; }
    int num_classes() const { return num_classes_; }
    Variant variant() const { return cfg_.variant; }

    /// Optional frozen pretrained extractor: when set it replaces the builtin
    /// backbone (its output is treated as a constant input to the heads).
    std::function<Tensor(const Tensor&)> external_backbone;

    /// images [N,3,H,W] -> spatial features [N,C_f,H_f,W_f]
    Var backbone_forward(const Tensor& images) {
        if (images.dim(2) != cfg_.height || images.dim(3) != cfg_.width)
            throw std::invalid_argument("backbone_forward: resolution mismatch");
        if (external_backbone) return Var::leaf(external_backbone(images));
        return backbone_.forward(Var::leaf(images));
    }
    Var backbone_forward(const Var& images) { return backbone_.forward(images); }

    /// identity-related part features
    PartSet encode_parts(const Var& feature_map) { return encode_with(er_heads_, feature_map); }

    /// identity-unrelated features; DC emits them directly, KL samples them
    /// via mean + exp(logvar/2) * eps
    UnrelatedOut encode_unrelated(const Var& feature_map, FwdCtx& ctx) {
        UnrelatedOut out;
        out.parts.layout = cfg_.layout;
        int fh = feature_map.value().dim(2);
        cfg_.layout.validate_feature_height(fh);
        if (cfg_.variant == Variant::DC) {
            out.parts = encode_with(eu_heads_, feature_map);
            return out;
        }
        int n = feature_map.value().dim(0);
        for (std::size_t bi = 0; bi < cfg_.layout.branches.size(); ++bi) {
            int strips = cfg_.layout.branches[bi];
            auto emit = [&](int h0, int h1) {
                Var pooled = eu_heads_[bi].pooled_region(feature_map, h0, h1, cfg_.leaky_slope);
                Var mu = kl_heads_[bi].mean_of(pooled);
                Var lv = kl_heads_[bi].logvar_of(pooled, cfg_.logvar_clamp);
                Tensor epsv({n, cfg_.layout.per_part_dim});
                if (ctx.training)
                    for (std::int64_t i = 0; i < epsv.numel(); ++i) epsv[i] = ctx.rng.normal();
                Var sample = add(mu, mul(vexp(scale(lv, 0.5)), Var::leaf(epsv)));
                out.parts.parts.push_back(sample);
                out.kl_params.emplace_back(mu, lv);
            };
            emit(0, fh);
            if (strips > 1)
                for (int s = 0; s < strips; ++s) emit(s * fh / strips, (s + 1) * fh / strips);
        }
        out.parts.check_complete();
        return out;
    }

    /// per-part classification logits w^k phi_R^k, K entries of [N,C]
    std::vector<Var> classifier_logits(const PartSet& phi_r) const {
        std::vector<Var> out;
        out.reserve(classifier_.size());
        for (std::size_t k = 0; k < classifier_.size(); ++k)
            out.push_back(classifier_[k].forward(phi_r.parts[k]));
        return out;
    }

    Var generate(const Var& composed, const Var& noise, const Var& onehot, FwdCtx& ctx) {
        return generator_.forward(composed, noise, onehot, ctx);
    }
    Var discriminate_domain(const Var& images) const { return disc_domain_.forward(images); }
    Var discriminate_class(const Var& images) const { return disc_class_.forward(images); }

    Tensor onehot(const std::vector<int>& labels) const {
        Tensor t({static_cast<int>(labels.size()), num_classes_});
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] >= num_classes_) throw std::out_of_range("onehot: label >= C");
            if (labels[i] >= 0) t[t.idx2(static_cast<int>(i), labels[i])] = 1.0;
            // negative label = label-free generation (all zeros)
        }
        return t;
    }

    std::vector<NamedParam> params(Component c) {
        std::vector<NamedParam> out;
        std::string p = component_name(c);
        switch (c) {
            case Component::Backbone: backbone_.params(p, out); break;
            case Component::EncoderR:
                for (std::size_t i = 0; i < er_heads_.size(); ++i)
                    er_heads_[i].params(p + ".branch" + std::to_string(i), out);
                break;
            case Component::Classifier:
                for (std::size_t i = 0; i < classifier_.size(); ++i)
                    classifier_[i].params(p + ".part" + std::to_string(i), out);
                break;
            case Component::EncoderU:
                for (std::size_t i = 0; i < eu_heads_.size(); ++i)
                    eu_heads_[i].params(p + ".branch" + std::to_string(i), out);
                for (std::size_t i = 0; i < kl_heads_.size(); ++i)
                    kl_heads_[i].params(p + ".klhead" + std::to_string(i), out);
                break;
            case Component::Generator: generator_.params(p, out); break;
            case Component::DiscDomain: disc_domain_.params(p, out); break;
            case Component::DiscClass: disc_class_.params(p, out); break;
        }
        return out;
    }

    std::vector<NamedParam> all_params() {
        std::vector<NamedParam> out;
        for (Component c : all_components()) {
            auto v = params(c);
            out.insert(out.end(), v.begin(), v.end());
        }
        return out;
    }

    std::vector<NamedBuffer> all_buffers() {
        std::vector<NamedBuffer> out;
        generator_.buffers("generator", out);
        return out;
    }

    void set_trainable(const std::set<Component>& trainable) {
        for (Component c : all_components())
            isgan::set_trainable(params(c), trainable.count(c) > 0);
    }

    void export_tensors(std::map<std::string, Tensor>& out) {
        for (auto& p : all_params()) out["param." + p.name] = p.var->value();
        for (auto& b : all_buffers()) out["buffer." + b.name] = *b.tensor;
    }

    void import_tensors(const std::map<std::string, Tensor>& in) {
        for (auto& p : all_params()) {
            auto it = in.find("param." + p.name);
            if (it == in.end()) throw std::runtime_error("checkpoint missing param " + p.name);
            if (!it->second.same_shape(p.var->value()))
                throw std::runtime_error("checkpoint shape mismatch for " + p.name);
            p.var->value() = it->second;
        }
        for (auto& b : all_buffers()) {
            auto it = in.find("buffer." + b.name);
            if (it == in.end()) throw std::runtime_error("checkpoint missing buffer " + b.name);
            *b.tensor = it->second;
        }
    }

    /// FNV-1a over the raw parameter bytes; used by the freeze contract tests
    std::uint64_t component_hash(Component c) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        auto mix_bytes = [&h](const void* data, std::size_t n) {
            const unsigned char* b = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= b[i];
                h *= 0x100000001B3ULL;
            }
        };
        for (auto& p : params(c))
            mix_bytes(p.var->value().data(), static_cast<std::size_t>(p.var->value().numel()) * sizeof(double));
        return h;
    }

private:
    PartSet encode_with(std::vector<BranchHead>& heads, const Var& feature_map) {
        PartSet set;
        set.layout = cfg_.layout;
        int fh = feature_map.value().dim(2);
        cfg_.layout.validate_feature_height(fh);
        for (std::size_t bi = 0; bi < cfg_.layout.branches.size(); ++bi) {
            int strips = cfg_.layout.branches[bi];
            auto region = [&](int h0, int h1) {
                return heads[bi].part_of(heads[bi].pooled_region(feature_map, h0, h1, cfg_.leaky_slope));
            };
            set.parts.push_back(region(0, fh));
            if (strips > 1)
                for (int s = 0; s < strips; ++s)
                    set.parts.push_back(region(s * fh / strips, (s + 1) * fh / strips));
        }
        set.check_complete();
        return set;
    }

    ModelConfig cfg_;
    int num_classes_ = 0;
    Backbone backbone_;
    std::vector<BranchHead> er_heads_;
    std::vector<BranchHead> eu_heads_;
    std::vector<KlHead> kl_heads_;
    std::vector<LinearLayer> classifier_;
    Generator generator_;
    DomainDiscriminator disc_domain_;
    ClassDiscriminator disc_class_;
};

}  // namespace isgan::model

#pragma once

#include "isgan/core/nn.hpp"
#include "isgan/model/config.hpp"

namespace isgan::model {

/// Per-forward context: training gates dropout/batch-norm behavior, rng feeds
/// dropout masks and the KL reparameterization.
struct FwdCtx {
    bool training = false;
    RngStream rng{0};
};

/// Small strided conv stack standing in for the cropped classification
/// backbone. Any pretrained extractor can be plugged in instead (see
/// ModelBundle::external_backbone).
class Backbone {
public:
    Backbone() = default;
    Backbone(const ModelConfig& cfg, RngStream rng) : slope_(cfg.leaky_slope) {
        int in = 3;
        for (std::size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
            convs_.emplace_back(in, cfg.backbone_channels[i], cfg.backbone_kernel,
                                cfg.backbone_strides[i], cfg.backbone_kernel / 2, rng.derive(i));
            in = cfg.backbone_channels[i];
        }
    }
    Var forward(const Var& x) const {
        Var h = x;
        for (const auto& c : convs_) h = leaky_relu(c.forward(h), slope_);
        return h;
    }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        for (std::size_t i = 0; i < convs_.size(); ++i)
            convs_[i].params(p + ".conv" + std::to_string(i), out);
    }

private:
    std::vector<Conv2dLayer> convs_;
    double slope_ = 0.2;
};

/// One part branch: two convolutions, global max pooling, bottleneck to p
/// dims. The head is applied per region (full map for the global feature,
/// one strip slice per local), with the same weights for every region of the
/// branch.
class BranchHead {
public:
    BranchHead() = default;
    BranchHead(int in_ch, int head_ch, int kernel, int p_dim, RngStream rng) {
        conv1_ = Conv2dLayer(in_ch, head_ch, kernel, 1, kernel / 2, rng.derive(0));
        conv2_ = Conv2dLayer(head_ch, head_ch, kernel, 1, kernel / 2, rng.derive(1));
        bottleneck_ = LinearLayer(head_ch, p_dim, true, rng.derive(2));
    }
    /// pooled region descriptor before the bottleneck: [N, head_ch]
    Var pooled_region(const Var& map, int h0, int h1, double slope) const {
        Var region = slice_h(map, h0, h1);
        Var h = leaky_relu(conv2_.forward(leaky_relu(conv1_.forward(region), slope)), slope);
        return max_pool_region(h, 0, h.value().dim(2));
    }
    Var part_of(const Var& pooled) const { return bottleneck_.forward(pooled); }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        conv1_.params(p + ".conv1", out);
        conv2_.params(p + ".conv2", out);
        bottleneck_.params(p + ".bottleneck", out);
    }

private:
    Conv2dLayer conv1_, conv2_;
    LinearLayer bottleneck_;
};

/// Extra heads for the KL variant: fully connected layers predicting the
/// mean and log-variance of each part's identity-unrelated feature.
class KlHead {
public:
    KlHead() = default;
    KlHead(int head_ch, int p_dim, RngStream rng) {
        mean_fc_ = LinearLayer(head_ch, p_dim, true, rng.derive(0));
        logvar_fc_ = LinearLayer(head_ch, p_dim, true, rng.derive(1));
    }
    Var mean_of(const Var& pooled) const { return mean_fc_.forward(pooled); }
    Var logvar_of(const Var& pooled, double clamp_to) const {
        return clamp(logvar_fc_.forward(pooled), -clamp_to, clamp_to);
    }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        mean_fc_.params(p + ".mean", out);
        logvar_fc_.params(p + ".logvar", out);
    }

private:
    LinearLayer mean_fc_, logvar_fc_;
};

/// Decodes composed features + noise + one-hot label through an FC stem and
/// a stack of stride-2 transposed convolutions (batch norm, leaky ReLU and
/// dropout on the early stages, tanh at the end). Output is mapped to [0,1].
class Generator {
public:
    Generator() = default;
    Generator(const ModelConfig& cfg, int num_classes, RngStream rng)
        : base_h_(cfg.gen_base_h),
          base_w_(cfg.gen_base_w),
          base_c_(cfg.gen_base_channels),
          dropout_stages_(cfg.gen_dropout_stages),
          dropout_p_(cfg.gen_dropout_p),
          slope_(cfg.leaky_slope) {
        int in_dim = cfg.layout.feature_dim() + cfg.noise_dim + num_classes;
        fc_ = LinearLayer(in_dim, base_c_ * base_h_ * base_w_, true, rng.derive(0));
        int stages = cfg.gen_stages();
        int in_ch = base_c_;
        for (int s = 0; s < stages; ++s) {
            int out_ch = (s + 1 < stages) ? cfg.gen_stage_channels[static_cast<std::size_t>(s)] : 3;
            deconvs_.emplace_back(in_ch, out_ch, 4, 2, 1, rng.derive(100 + s));
            if (s + 1 < stages) bns_.emplace_back(out_ch, cfg.bn_momentum);
            in_ch = out_ch;
        }
    }

    /// composed:[N,K*p], noise:[N,z], onehot:[N,C] -> image [N,3,H,W] in [0,1]
    Var forward(const Var& composed, const Var& noise, const Var& onehot, FwdCtx& ctx) {
        int n = composed.value().dim(0);
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int c = 0; c < onehot.value().dim(1); ++c)
                s += onehot.value()[onehot.value().idx2(i, c)];
            if (std::abs(s) > 1e-9 && std::abs(s - 1.0) > 1e-9)
                throw std::invalid_argument("generate: label one-hot must sum to 1 or be all zero");
        }
        Var h = fc_.forward(concat_cols({composed, noise, onehot}));
        h = reshape(h, {n, base_c_, base_h_, base_w_});
        for (std::size_t s = 0; s < deconvs_.size(); ++s) {
            h = deconvs_[s].forward(h);
            if (s + 1 < deconvs_.size()) {
                h = bns_[s].forward(h, ctx.training);
                h = leaky_relu(h, slope_);
                if (static_cast<int>(s) < dropout_stages_)
                    h = dropout(h, dropout_p_, ctx.training, ctx.rng);
            }
        }
        return offset(scale(vtanh(h), 0.5), 0.5);
    }

    int num_stages() const { return static_cast<int>(deconvs_.size()); }

    void params(const std::string& p, std::vector<NamedParam>& out) {
        fc_.params(p + ".fc", out);
        for (std::size_t i = 0; i < deconvs_.size(); ++i)
            deconvs_[i].params(p + ".deconv" + std::to_string(i), out);
        for (std::size_t i = 0; i < bns_.size(); ++i)
            bns_[i].params(p + ".bn" + std::to_string(i), out);
    }
    void buffers(const std::string& p, std::vector<NamedBuffer>& out) {
        for (std::size_t i = 0; i < bns_.size(); ++i)
            bns_[i].buffers(p + ".bn" + std::to_string(i), out);
    }

private:
    LinearLayer fc_;
    std::vector<ConvT2dLayer> deconvs_;
    std::vector<BatchNorm2dLayer> bns_;
    int base_h_ = 2, base_w_ = 1, base_c_ = 128;
    int dropout_stages_ = 3;
    double dropout_p_ = 0.5;
    double slope_ = 0.2;
};

/// Shared trunk shape for both discriminators: stride-2 conv blocks with
/// instance norm and leaky ReLU.
class DiscTrunk {
public:
    DiscTrunk() = default;
    DiscTrunk(const ModelConfig& cfg, RngStream rng) : slope_(cfg.leaky_slope) {
        int in = 3;
        for (std::size_t i = 0; i < cfg.disc_channels.size(); ++i) {
            convs_.emplace_back(in, cfg.disc_channels[i], 4, 2, 1, rng.derive(i));
            in = cfg.disc_channels[i];
        }
    }
    Var forward(const Var& x) const {
        Var h = x;
        for (const auto& c : convs_) h = leaky_relu(instance_norm2d(c.forward(h)), slope_);
        return h;
    }
    int out_channels() const { return convs_.back().weight.value().dim(0); }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        for (std::size_t i = 0; i < convs_.size(); ++i)
            convs_[i].params(p + ".block" + std::to_string(i), out);
    }

private:
    std::vector<Conv2dLayer> convs_;
    double slope_ = 0.2;
};

/// PatchGAN-style domain discriminator: trunk, a few stride-1 blocks, then a
/// 1-channel patch logit map.
class DomainDiscriminator {
public:
    DomainDiscriminator() = default;
    DomainDiscriminator(const ModelConfig& cfg, RngStream rng)
        : trunk_(cfg, rng.derive(0)), slope_(cfg.leaky_slope) {
        int ch = trunk_.out_channels();
        for (int i = 0; i < cfg.dd_head_blocks; ++i)
            head_.emplace_back(ch, ch, 3, 1, 1, rng.derive(10 + i));
        patch_ = Conv2dLayer(ch, 1, 3, 1, 1, rng.derive(99));
    }
    /// image [N,3,H,W] -> patch logits [N,1,h,w]
    Var forward(const Var& x) const {
        Var h = trunk_.forward(x);
        for (const auto& c : head_) h = leaky_relu(instance_norm2d(c.forward(h)), slope_);
        return patch_.forward(h);
    }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        trunk_.params(p + ".trunk", out);
        for (std::size_t i = 0; i < head_.size(); ++i)
            head_[i].params(p + ".head" + std::to_string(i), out);
        patch_.params(p + ".patch", out);
    }

private:
    DiscTrunk trunk_;
    std::vector<Conv2dLayer> head_;
    Conv2dLayer patch_;
    double slope_ = 0.2;
};

/// Class discriminator: same trunk shape, one more stride-2 block, then a
/// fully connected layer to C logits.
class ClassDiscriminator {
public:
    ClassDiscriminator() = default;
    ClassDiscriminator(const ModelConfig& cfg, int num_classes, RngStream rng)
        : trunk_(cfg, rng.derive(0)), slope_(cfg.leaky_slope) {
        int ch = trunk_.out_channels();
        extra_ = Conv2dLayer(ch, ch, 4, 2, 1, rng.derive(1));
        int fh = cfg.disc_trunk_h() / 2;
        int fw = std::max(1, cfg.disc_trunk_w() / 2);
        fc_ = LinearLayer(ch * fh * fw, num_classes, true, rng.derive(2));
        flat_dim_ = ch * fh * fw;
    }
    /// image [N,3,H,W] -> class logits [N,C]
    Var forward(const Var& x) const {
        Var h = leaky_relu(instance_norm2d(extra_.forward(trunk_.forward(x))), slope_);
        int n = h.value().dim(0);
        return fc_.forward(reshape(h, {n, flat_dim_}));
    }
    void params(const std::string& p, std::vector<NamedParam>& out) {
        trunk_.params(p + ".trunk", out);
        extra_.params(p + ".extra", out);
        fc_.params(p + ".fc", out);
    }

private:
    DiscTrunk trunk_;
    Conv2dLayer extra_;
    LinearLayer fc_;
    int flat_dim_ = 0;
    double slope_ = 0.2;
};

}  // namespace isgan::model

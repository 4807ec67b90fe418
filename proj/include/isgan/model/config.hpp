#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "isgan/model/layout.hpp"

namespace isgan::model {

enum class Variant { KL, DC };

inline const char* variant_name(Variant v) { return v == Variant::KL ? "KL" : "DC"; }
inline Variant variant_from_name(const std::string& s) {
    if (s == "KL" || s == "kl") return Variant::KL;
    if (s == "DC" || s == "dc") return Variant::DC;
    throw std::invalid_argument("unknown variant: " + s);
}

/// Architecture hyperparameters. The defaults mirror the full-scale setup
/// (384x128 input, three part branches, p=256, six generator stages, five
/// shared discriminator blocks); toy configs shrink every dimension.
struct ModelConfig {
    int height = 384;
    int width = 128;
    PartLayout layout;

    std::vector<int> backbone_channels{16, 32, 64, 64};
    std::vector<int> backbone_strides{2, 2, 2, 1};
    int backbone_kernel = 3;

    int head_channels = 64;
    int head_kernel = 3;

    int noise_dim = 128;
    int gen_base_h = 6;
    int gen_base_w = 2;
    int gen_base_channels = 256;
    std::vector<int> gen_stage_channels{256, 128, 64, 32, 16};  // stages-1 entries; last stage emits RGB
    int gen_dropout_stages = 3;
    double gen_dropout_p = 0.5;

    std::vector<int> disc_channels{32, 64, 128, 256, 512};  // stride-2 trunk blocks
    int dd_head_blocks = 2;                                 // extra stride-1 blocks before the patch map

    double leaky_slope = 0.2;
    Variant variant = Variant::DC;
    double logvar_clamp = 8.0;
    double bn_momentum = 0.1;

    int total_stride() const {
        int s = 1;
        for (int st : backbone_strides) s *= st;
        return s;
    }
    int feature_h() const { return height / total_stride(); }
    int feature_w() const { return width / total_stride(); }

    int gen_stages() const {
        double s = std::log2(static_cast<double>(height) / gen_base_h);
        return static_cast<int>(std::lround(s));
    }

    int disc_trunk_h() const { return height >> static_cast<int>(disc_channels.size()); }
    int disc_trunk_w() const { return width >> static_cast<int>(disc_channels.size()); }

    void validate() const {
        if (backbone_channels.size() != backbone_strides.size())
            throw std::invalid_argument("model config: backbone channels/strides length mismatch");
        if (height % total_stride() != 0 || width % total_stride() != 0)
            throw std::invalid_argument("model config: resolution not divisible by backbone stride");
        int hf = feature_h();
        for (int b : layout.branches)
            if (hf % b != 0)
                throw std::invalid_argument(
                    "model config: feature height " + std::to_string(hf) +
                    " not divisible by strip count " + std::to_string(b) +
                    " (choose a compatible layout/resolution)");
        int stages = gen_stages();
        if (gen_base_h << stages != height || gen_base_w << stages != width)
            throw std::invalid_argument(
                "model config: target resolution is not a power-of-two multiple of the generator base grid");
        if (static_cast<int>(gen_stage_channels.size()) != stages - 1)
            throw std::invalid_argument("model config: gen_stage_channels must have " +
                                        std::to_string(stages - 1) + " entries");
        if (disc_trunk_h() < 2 || disc_trunk_w() < 1)
            throw std::invalid_argument("model config: discriminator trunk map smaller than 2x1");
        if (gen_dropout_p < 0.0 || gen_dropout_p >= 1.0)
            throw std::invalid_argument("model config: dropout probability out of range");
    }
};

/// Ready-made desk-scale configuration: 64x32 images, strides (2,2,2,1) give
/// an 8x4 map, and the [1,2,4] layout keeps every strip count a divisor of 8
/// (no power-of-two feature height is divisible by 3).
inline ModelConfig toy_model_config() {
    ModelConfig c;
    c.height = 64;
    c.width = 32;
    c.layout.branches = {1, 2, 4};
    c.layout.per_part_dim = 32;
    c.backbone_channels = {16, 32, 64, 64};
    c.backbone_strides = {2, 2, 2, 1};
    c.head_channels = 48;
    c.noise_dim = 32;
    c.gen_base_h = 2;
    c.gen_base_w = 1;
    c.gen_base_channels = 128;
    c.gen_stage_channels = {96, 64, 48, 32};
    c.disc_channels = {16, 32, 64, 128};
    c.dd_head_blocks = 1;
    return c;
}

}  // namespace isgan::model

#pragma once

#include "isgan/core/rng.hpp"
#include "isgan/dataset/record.hpp"

namespace isgan::data {

/// Resize -> random flip -> zero-pad + random crop -> random erasing.
/// Erasing parameters follow the usual random-erasing defaults; the fill is
/// the per-channel dataset mean carried in the policy.
struct AugmentPolicy {
    int target_h = 64;
    int target_w = 32;
    double flip_p = 0.5;
    bool crop = true;
    double crop_pad_frac = 0.1;
    double erase_p = 0.5;
    double erase_area_lo = 0.02;
    double erase_area_hi = 0.4;
    double erase_aspect_lo = 0.3;
    double erase_aspect_hi = 3.3;
    std::array<double, 3> fill_mean = {0.5, 0.5, 0.5};

    static AugmentPolicy identity(int h, int w) {
        AugmentPolicy p;
        p.target_h = h;
        p.target_w = w;
        p.flip_p = 0.0;
        p.crop = false;
        p.erase_p = 0.0;
        return p;
    }
};

namespace detail {

inline Tensor pad_crop(const Tensor& img, int pad_h, int pad_w, int off_y, int off_x) {
    int h = image_height(img), w = image_width(img);
    Tensor out({3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int sy = y + off_y - pad_h;
                int sx = x + off_x - pad_w;
                out[out.idx3(c, y, x)] = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                                             ? img[img.idx3(c, sy, sx)]
                                             : 0.0;
            }
    return out;
}

inline void random_erase(Tensor& img, RngStream& rng, const AugmentPolicy& p) {
    int h = image_height(img), w = image_width(img);
    double area = static_cast<double>(h) * w;
    for (int attempt = 0; attempt < 100; ++attempt) {
        double target = rng.uniform(p.erase_area_lo, p.erase_area_hi) * area;
        double aspect = rng.uniform(p.erase_aspect_lo, p.erase_aspect_hi);
        int eh = static_cast<int>(std::lround(std::sqrt(target * aspect)));
        int ew = static_cast<int>(std::lround(std::sqrt(target / aspect)));
        if (eh < 1 || ew < 1 || eh >= h || ew >= w) continue;
        int y0 = rng.uniform_int(h - eh);
        int x0 = rng.uniform_int(w - ew);
        for (int c = 0; c < 3; ++c)
            for (int y = y0; y < y0 + eh; ++y)
                for (int x = x0; x < x0 + ew; ++x)
                    img[img.idx3(c, y, x)] = p.fill_mean[static_cast<std::size_t>(c)];
        return;
    }
}

}  // namespace detail

inline Tensor augment(const Tensor& image, RngStream rng, const AugmentPolicy& p) {
    Tensor out = resize_bilinear(image, p.target_h, p.target_w);
    if (p.flip_p > 0.0 && rng.bernoulli(p.flip_p)) out = flip_horizontal(out);
    if (p.crop) {
        int pad_h = std::max(1, static_cast<int>(std::lround(p.crop_pad_frac * p.target_h)));
        int pad_w = std::max(1, static_cast<int>(std::lround(p.crop_pad_frac * p.target_w)));
        int off_y = rng.uniform_int(2 * pad_h + 1);
        int off_x = rng.uniform_int(2 * pad_w + 1);
        out = detail::pad_crop(out, pad_h, pad_w, off_y, off_x);
    }
    if (p.erase_p > 0.0 && rng.bernoulli(p.erase_p)) detail::random_erase(out, rng, p);
    return out;
}

inline Tensor augment(const ImageRecord& record, RngStream rng, const AugmentPolicy& p) {
    return augment(record.image, rng, p);
}

}  // namespace isgan::data

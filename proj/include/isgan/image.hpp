#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "isgan/core/tensor.hpp"

namespace isgan {

/// Images are CHW RGB tensors with values in [0,1].
inline Tensor make_image(int h, int w, double fill = 0.0) { return Tensor({3, h, w}, fill); }

inline int image_height(const Tensor& img) { return img.dim(1); }
inline int image_width(const Tensor& img) { return img.dim(2); }

inline Tensor image_from_u8(const std::vector<std::uint8_t>& rgb, int h, int w) {
    Tensor img({3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img[img.idx3(c, y, x)] = rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    return img;
}

inline std::vector<std::uint8_t> image_to_u8(const Tensor& img) {
    int h = image_height(img), w = image_width(img);
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = std::clamp(img[img.idx3(c, y, x)], 0.0, 1.0);
                rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    return rgb;
}

/// Bilinear resize with half-pixel sample centers (the usual convention, so
/// an equal-size resize is the identity).
inline Tensor resize_bilinear(const Tensor& src, int out_h, int out_w) {
    int h = image_height(src), w = image_width(src);
    if (h == out_h && w == out_w) return src;
    Tensor dst({3, out_h, out_w});
    double sy = static_cast<double>(h) / out_h;
    double sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int ya = std::clamp(y0, 0, h - 1);
        int yb = std::clamp(y0 + 1, 0, h - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int xa = std::clamp(x0, 0, w - 1);
            int xb = std::clamp(x0 + 1, 0, w - 1);
            for (int c = 0; c < 3; ++c) {
                double top = (1 - wx) * src[src.idx3(c, ya, xa)] + wx * src[src.idx3(c, ya, xb)];
                double bot = (1 - wx) * src[src.idx3(c, yb, xa)] + wx * src[src.idx3(c, yb, xb)];
                dst[dst.idx3(c, y, x)] = (1 - wy) * top + wy * bot;
            }
        }
    }
    return dst;
}

inline Tensor flip_horizontal(const Tensor& src) {
    int h = image_height(src), w = image_width(src);
    Tensor dst({3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) dst[dst.idx3(c, y, x)] = src[src.idx3(c, y, w - 1 - x)];
    return dst;
}

inline std::array<double, 3> channel_means(const Tensor& img) {
    int h = image_height(img), w = image_width(img);
    std::array<double, 3> m{0, 0, 0};
    for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) s += img[img.idx3(c, y, x)];
        m[static_cast<std::size_t>(c)] = s / (static_cast<double>(h) * w);
    }
    return m;
}

/// Stack CHW images into an NCHW batch.
inline Tensor stack_images(const std::vector<Tensor>& images) {
    if (images.empty()) throw std::invalid_argument("stack_images: empty");
    int h = image_height(images[0]), w = image_width(images[0]);
    Tensor out({static_cast<int>(images.size()), 3, h, w});
    std::int64_t sz = images[0].numel();
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i].same_shape(images[0]))
            throw std::invalid_argument("stack_images: mixed shapes");
        std::copy(images[i].data(), images[i].data() + sz, out.data() + static_cast<std::int64_t>(i) * sz);
    }
    return out;
}

/// Extract sample i of an NCHW batch as a CHW image.
inline Tensor batch_slice(const Tensor& batch, int i) {
    Tensor out({batch.dim(1), batch.dim(2), batch.dim(3)});
    std::int64_t sz = out.numel();
    std::copy(batch.data() + i * sz, batch.data() + (i + 1) * sz, out.data());
    return out;
}

}  // namespace isgan

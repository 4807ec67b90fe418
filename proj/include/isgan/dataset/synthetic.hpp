#pragma once

#include <map>
#include <set>
#include <tuple>

#include "isgan/core/rng.hpp"
#include "isgan/dataset/record.hpp"

namespace isgan::data {

/// Clothing palette: saturated, well separated hues (8-bit exact so PNG
/// round-trips are lossless).
inline const std::vector<std::array<double, 3>>& clothing_palette() {
    static const std::vector<std::array<double, 3>> p = {
        {230 / 255.0, 25 / 255.0, 75 / 255.0},   {60 / 255.0, 180 / 255.0, 75 / 255.0},
        {255 / 255.0, 225 / 255.0, 25 / 255.0},  {0 / 255.0, 130 / 255.0, 200 / 255.0},
        {245 / 255.0, 130 / 255.0, 48 / 255.0},  {145 / 255.0, 30 / 255.0, 180 / 255.0},
        {70 / 255.0, 240 / 255.0, 240 / 255.0},  {240 / 255.0, 50 / 255.0, 230 / 255.0},
        {210 / 255.0, 245 / 255.0, 60 / 255.0},  {0 / 255.0, 128 / 255.0, 128 / 255.0},
        {170 / 255.0, 110 / 255.0, 40 / 255.0},  {128 / 255.0, 0 / 255.0, 0 / 255.0},
    };
    return p;
}

inline const std::vector<std::array<double, 3>>& background_palette() {
    static const std::vector<std::array<double, 3>> p = {
        {220 / 255.0, 220 / 255.0, 220 / 255.0}, {180 / 255.0, 200 / 255.0, 220 / 255.0},
        {200 / 255.0, 220 / 255.0, 180 / 255.0}, {235 / 255.0, 215 / 255.0, 185 / 255.0},
        {160 / 255.0, 160 / 255.0, 180 / 255.0}, {210 / 255.0, 190 / 255.0, 210 / 255.0},
    };
    return p;
}

struct SynthParams {
    int n_ids = 20;
    int imgs_per_id = 16;
    int height = 64;
    int width = 32;
    int h_granularity = 1;  // vertical part-slicing granularity (stride * lcm of strips)
    double occlusion_p = 0.3;
    int n_cams = 4;
};

namespace detail {

struct Rect {
    double x0, y0, x1, y1;
};

inline void fill_rect(Tensor& img, const Rect& r, const std::array<double, 3>& color) {
    int h = image_height(img), w = image_width(img);
    int ix0 = std::max(0, static_cast<int>(std::lround(r.x0)));
    int iy0 = std::max(0, static_cast<int>(std::lround(r.y0)));
    int ix1 = std::min(w, static_cast<int>(std::lround(r.x1)));
    int iy1 = std::min(h, static_cast<int>(std::lround(r.y1)));
    for (int y = iy0; y < iy1; ++y)
        for (int x = ix0; x < ix1; ++x)
            for (int c = 0; c < 3; ++c) img[img.idx3(c, y, x)] = color[static_cast<std::size_t>(c)];
}

inline void fill_disc(Tensor& img, double cx, double cy, double radius,
                      const std::array<double, 3>& color) {
    int h = image_height(img), w = image_width(img);
    int ix0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    int iy0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    int ix1 = std::min(w, static_cast<int>(std::ceil(cx + radius)) + 1);
    int iy1 = std::min(h, static_cast<int>(std::ceil(cy + radius)) + 1);
    for (int y = iy0; y < iy1; ++y)
        for (int x = ix0; x < ix1; ++x) {
            double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy <= radius * radius)
                for (int c = 0; c < 3; ++c) img[img.idx3(c, y, x)] = color[static_cast<std::size_t>(c)];
        }
}

}  // namespace detail

/// Minimal person renderer: solid background, head disc, torso rectangle,
/// two leg rectangles; an optional gray bar simulates occlusion. Clothing
/// colors and body shape come from the identity, the rest is nuisance.
inline Tensor render_synthetic(int h, int w, const SyntheticFactors& f, double occl_x_frac) {
    Tensor img({3, h, w});
    const auto& cp = clothing_palette();
    const auto& bp = background_palette();
    detail::fill_rect(img, {0, 0, static_cast<double>(w), static_cast<double>(h)},
                      bp[static_cast<std::size_t>(f.bg_color) % bp.size()]);

    double cx = w / 2.0 + f.x_offset;
    double cy = h / 2.0 + f.y_offset;
    auto sy = [&](double frac) { return cy + (frac - 0.5) * h * f.scale; };

    static const double torso_w_frac[3] = {0.34, 0.46, 0.58};
    double tw = torso_w_frac[f.body_shape % 3] * w * f.scale;

    const std::array<double, 3> skin = {240 / 255.0, 200 / 255.0, 160 / 255.0};
    detail::fill_disc(img, cx, sy(0.17), 0.085 * h * f.scale, skin);

    const auto& tc = cp[static_cast<std::size_t>(f.torso_color) % cp.size()];
    detail::fill_rect(img, {cx - tw / 2, sy(0.26), cx + tw / 2, sy(0.56)}, tc);

    const auto& lc = cp[static_cast<std::size_t>(f.leg_color) % cp.size()];
    double lw = 0.38 * tw;
    double gap = 0.12 * tw;
    detail::fill_rect(img, {cx - gap / 2 - lw, sy(0.56), cx - gap / 2, sy(0.88)}, lc);
    detail::fill_rect(img, {cx + gap / 2, sy(0.56), cx + gap / 2 + lw, sy(0.88)}, lc);

    if (f.occlusion) {
        const std::array<double, 3> gray = {128 / 255.0, 128 / 255.0, 128 / 255.0};
        double bx = occl_x_frac * w;
        detail::fill_rect(img, {bx, 0, bx + 0.14 * w, static_cast<double>(h)}, gray);
    }
    return img;
}

/// Assigns each identity a distinct (torso, leg, shape) triple. Returns the
/// number of collisions (0 when the palette space is large enough).
inline int assign_identity_factors(int n_ids, RngStream rng, std::vector<SyntheticFactors>& out) {
    const int n_cloth = static_cast<int>(clothing_palette().size());
    const int space = n_cloth * n_cloth * 3;
    std::set<std::tuple<int, int, int>> used;
    out.resize(static_cast<std::size_t>(n_ids));
    int collisions = 0;
    for (int id = 0; id < n_ids; ++id) {
        SyntheticFactors f;
        bool placed = false;
        for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
            f.torso_color = rng.uniform_int(n_cloth);
            f.leg_color = rng.uniform_int(n_cloth);
            f.body_shape = rng.uniform_int(3);
            placed = !used.count({f.torso_color, f.leg_color, f.body_shape});
        }
        if (!placed) ++collisions;  // palette exhausted; reuse the last draw
        if (n_ids > space) ++collisions;
        used.insert({f.torso_color, f.leg_color, f.body_shape});
        out[static_cast<std::size_t>(id)] = f;
    }
    return collisions;
}

/// Deterministic synthetic generator. The same (seed, params) always yields
/// bit-identical pixels; identity-determined factors are constant within an
/// identity while nuisance factors vary per image.
inline std::vector<ImageRecord> synth_generate(std::uint64_t seed, int n_ids, int imgs_per_id,
                                               int height, int width, const SynthParams& extra = {},
                                               Split split = Split::Train, int* collisions_out = nullptr) {
    if (n_ids < 2) throw std::invalid_argument("synth_generate: n_ids must be >= 2");
    if (imgs_per_id < 2) throw std::invalid_argument("synth_generate: imgs_per_id must be >= 2");
    if (extra.h_granularity > 1 && height % extra.h_granularity != 0)
        throw std::invalid_argument("synth_generate: height not divisible by part-slicing granularity " +
                                    std::to_string(extra.h_granularity));

    RngStream root(seed);
    std::vector<SyntheticFactors> id_factors;
    int collisions = assign_identity_factors(
        n_ids, root.derive_str("factors").derive(static_cast<std::uint64_t>(split)), id_factors);
    if (collisions_out) *collisions_out = collisions;

    const int max_dx = std::max(1, width / 10);
    const int max_dy = std::max(1, height / 16);

    std::vector<ImageRecord> records;
    records.reserve(static_cast<std::size_t>(n_ids) * imgs_per_id);
    for (int id = 0; id < n_ids; ++id) {
        for (int k = 0; k < imgs_per_id; ++k) {
            auto rng = root.derive_str("image").derive(static_cast<std::uint64_t>(split), id, k);
            SyntheticFactors f = id_factors[static_cast<std::size_t>(id)];
            f.x_offset = rng.uniform_int(2 * max_dx + 1) - max_dx;
            f.y_offset = rng.uniform_int(2 * max_dy + 1) - max_dy;
            f.scale = rng.uniform(0.7, 1.3);
            f.bg_color = rng.uniform_int(static_cast<int>(background_palette().size()));
            f.occlusion = rng.bernoulli(extra.occlusion_p);
            double occl_x = rng.uniform(0.2, 0.7);

            ImageRecord r;
            r.image = render_synthetic(height, width, f, occl_x);
            r.identity = id;
            // synthetic camera = nuisance bucket (offset sign x scale regime)
            r.camera_id = ((f.x_offset >= 0) ? 2 : 0) + ((f.scale >= 1.0) ? 1 : 0);
            r.camera_id %= std::max(1, extra.n_cams);
            r.split = split;
            r.orig_id = std::to_string(id);
            r.factors = f;
            records.push_back(std::move(r));
        }
    }
    return records;
}

/// Full synthetic benchmark: a train split plus disjoint test identities
/// divided into query/gallery per image index.
struct SynthDataset {
    std::vector<ImageRecord> train, query, gallery;
    int n_train_ids = 0;
    int n_test_ids = 0;
    int factor_collisions = 0;
};

inline SynthDataset make_synth_dataset(std::uint64_t seed, const SynthParams& train_p,
                                       int test_ids, int test_imgs_per_id, int queries_per_id) {
    SynthDataset ds;
    int coll1 = 0, coll2 = 0;
    ds.train = synth_generate(seed, train_p.n_ids, train_p.imgs_per_id, train_p.height,
                              train_p.width, train_p, Split::Train, &coll1);
    ds.n_train_ids = train_p.n_ids;
    if (test_ids > 0) {
        SynthParams tp = train_p;
        tp.n_ids = test_ids;
        tp.imgs_per_id = test_imgs_per_id;
        auto test = synth_generate(seed + 1, test_ids, test_imgs_per_id, train_p.height,
                                   train_p.width, tp, Split::Query, &coll2);
        for (auto& r : test) {
            int k = 0;
            // image index within its identity decides the role
            for (const auto& q : ds.query)
                if (q.identity == r.identity) ++k;
            for (const auto& g : ds.gallery)
                if (g.identity == r.identity) ++k;
            if (k < queries_per_id) {
                r.split = Split::Query;
                ds.query.push_back(std::move(r));
            } else {
                r.split = Split::Gallery;
                ds.gallery.push_back(std::move(r));
            }
        }
        ds.n_test_ids = test_ids;
    }
    ds.factor_collisions = coll1 + coll2;
    return ds;
}

}  // namespace isgan::data

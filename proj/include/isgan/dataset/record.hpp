#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgan/image.hpp"

namespace isgan::data {

enum class Split { Train, Query, Gallery };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Query: return "query";
        case Split::Gallery: return "gallery";
    }
    return "?";
}

inline Split split_from_name(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "query") return Split::Query;
    if (s == "gallery") return Split::Gallery;
    throw std::invalid_argument("unknown split name: " + s);
}

/// Ground-truth generative factors of a synthetic record. The clothing triple
/// is a function of identity; everything else is per-image nuisance.
struct SyntheticFactors {
    int torso_color = 0;
    int leg_color = 0;
    int body_shape = 0;  // {0,1,2}
    int x_offset = 0;    // pixels
    int y_offset = 0;
    double scale = 1.0;  // [0.7, 1.3]
    int bg_color = 0;
    bool occlusion = false;
};

struct ImageRecord {
    Tensor image;  // CHW RGB in [0,1]
    int identity = 0;
    int camera_id = 0;
    Split split = Split::Train;
    std::string orig_id;  // id string as named by the source dataset
    std::string path;     // source file, empty for in-memory records
    std::optional<SyntheticFactors> factors;
};

inline void validate_record(const ImageRecord& r, int identity_count) {
    if (r.identity < 0 || r.identity >= identity_count)
        throw std::out_of_range("ImageRecord: identity outside [0, C)");
    for (std::int64_t i = 0; i < r.image.numel(); ++i)
        if (r.image[i] < 0.0 || r.image[i] > 1.0)
            throw std::out_of_range("ImageRecord: pixel outside [0,1]");
}

/// Mean RGB over a set of records (used as the erase fill value).
inline std::array<double, 3> dataset_channel_mean(const std::vector<ImageRecord>& records) {
    std::array<double, 3> m{0.5, 0.5, 0.5};
    if (records.empty()) return m;
    m = {0, 0, 0};
    for (const auto& r : records) {
        auto cm = channel_means(r.image);
        for (int c = 0; c < 3; ++c) m[static_cast<std::size_t>(c)] += cm[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < 3; ++c) m[static_cast<std::size_t>(c)] /= static_cast<double>(records.size());
    return m;
}

}  // namespace isgan::data

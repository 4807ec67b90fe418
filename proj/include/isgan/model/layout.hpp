#pragma once

#include <numeric>
#include <vector>

#include "isgan/core/ops.hpp"

namespace isgan::model {

/// Part-branch structure: each branch slices the backbone map into a number
/// of horizontal strips. A one-strip branch contributes a single global
/// feature; a multi-strip branch contributes one global plus one local
/// feature per strip. Default [1,2,3] with p=256 gives K=8 and a 2048-dim
/// concatenated feature.
struct PartLayout {
    std::vector<int> branches{1, 2, 3};
    int per_part_dim = 256;

    struct PartDesc {
        int branch;  // index into branches
        int strip;   // -1 for the branch-global part
    };

    int num_parts() const {
        int k = 0;
        for (int b : branches) k += (b > 1) ? 1 + b : 1;
        return k;
    }
    int feature_dim() const { return num_parts() * per_part_dim; }

    std::vector<PartDesc> parts() const {
        std::vector<PartDesc> out;
        for (std::size_t bi = 0; bi < branches.size(); ++bi) {
            out.push_back({static_cast<int>(bi), -1});
            if (branches[bi] > 1)
                for (int s = 0; s < branches[bi]; ++s) out.push_back({static_cast<int>(bi), s});
        }
        return out;
    }

    int lcm_strips() const {
        int l = 1;
        for (int b : branches) l = std::lcm(l, b);
        return l;
    }

    /// flat part index of (branch, strip); strip -1 addresses the global
    int part_index(int branch, int strip) const {
        int idx = 0;
        for (int bi = 0; bi < branch; ++bi) idx += (branches[static_cast<std::size_t>(bi)] > 1)
                                                       ? 1 + branches[static_cast<std::size_t>(bi)]
                                                       : 1;
        if (strip < 0) return idx;
        return idx + 1 + strip;
    }

    bool operator==(const PartLayout& o) const {
        return branches == o.branches && per_part_dim == o.per_part_dim;
    }
    bool operator!=(const PartLayout& o) const { return !(*this == o); }

    void validate_feature_height(int h) const {
        for (int b : branches)
            if (h % b != 0)
                throw std::invalid_argument("feature map height " + std::to_string(h) +
                                            " not divisible by strip count " + std::to_string(b));
    }
};

/// K per-part feature vectors of one encoder pass, branch-major order.
/// Each part is an [N, p] Var so the set can carry a whole batch.
struct PartSet {
    std::vector<Var> parts;
    PartLayout layout;

    int batch_size() const { return parts.empty() ? 0 : parts[0].value().dim(0); }

    void check_complete() const {
        if (static_cast<int>(parts.size()) != layout.num_parts())
            throw std::logic_error("PartSet: wrong part count");
        for (const auto& p : parts) {
            if (p.value().ndim() != 2 || p.value().dim(1) != layout.per_part_dim)
                throw std::logic_error("PartSet: bad part shape");
            if (!p.value().all_finite()) throw std::runtime_error("PartSet: non-finite feature");
        }
    }

    /// row view of one sample as a new PartSet of batch 1
    PartSet row(int i) const {
        PartSet out;
        out.layout = layout;
        out.parts.reserve(parts.size());
        for (const auto& p : parts) out.parts.push_back(select_rows(p, {i}));
        return out;
    }

    /// concatenated [N, K*p] feature
    Var concat() const { return concat_cols(parts); }
};

}  // namespace isgan::model

#pragma once

#include "isgan/core/rng.hpp"
#include "isgan/model/layout.hpp"

namespace isgan::disentangle {

using model::PartLayout;
using model::PartSet;

enum class ShuffleMode { ShortTerm, LongTerm };

inline const char* shuffle_mode_name(ShuffleMode m) {
    return m == ShuffleMode::ShortTerm ? "short_term" : "long_term";
}
inline ShuffleMode shuffle_mode_from_name(const std::string& s) {
    if (s == "short_term") return ShuffleMode::ShortTerm;
    if (s == "long_term") return ShuffleMode::LongTerm;
    throw std::invalid_argument("unknown mode: " + s);
}

/// Boolean selection over the shuffleable local-feature units. The registry
/// covers exactly the local features (globals are never shuffled); long-term
/// mode drops the last strip of every multi-strip branch, since lower-body
/// cues are unreliable when clothing changes.
struct ShuffleMask {
    std::vector<std::pair<int, int>> registry;  // (branch, strip)
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return registry.size(); }
    bool any() const {
        for (auto b : bits)
            if (b) return true;
        return false;
    }
    ShuffleMask complement() const {
        ShuffleMask m = *this;
        for (auto& b : m.bits) b = b ? 0 : 1;
        return m;
    }
};

inline std::vector<std::pair<int, int>> shuffle_registry(const PartLayout& layout, ShuffleMode mode) {
    std::vector<std::pair<int, int>> reg;
    for (std::size_t bi = 0; bi < layout.branches.size(); ++bi) {
        int strips = layout.branches[bi];
        if (strips <= 1) continue;
        int last = (mode == ShuffleMode::LongTerm) ? strips - 1 : strips;
        for (int s = 0; s < last; ++s) reg.emplace_back(static_cast<int>(bi), s);
    }
    return reg;
}

/// i.i.d. Bernoulli(0.5) per unit, rejecting the all-false draw so at least
/// one local feature is always swapped.
inline ShuffleMask sample_mask(RngStream& rng, const PartLayout& layout, ShuffleMode mode) {
    ShuffleMask m;
    m.registry = shuffle_registry(layout, mode);
    if (m.registry.empty())
        throw std::invalid_argument("sample_mask: layout has no shuffleable local features");
    m.bits.assign(m.registry.size(), 0);
    do {
        for (auto& b : m.bits) b = rng.bernoulli(0.5) ? 1 : 0;
    } while (!m.any());
    return m;
}

/// Element-wise addition per part, concatenated branch-major: [N, K*p].
inline Var compose(const PartSet& phi_r, const PartSet& phi_u) {
    if (phi_r.layout != phi_u.layout)
        throw std::invalid_argument("compose: layout mismatch");
    std::vector<Var> summed;
    summed.reserve(phi_r.parts.size());
    for (std::size_t k = 0; k < phi_r.parts.size(); ++k)
        summed.push_back(add(phi_r.parts[k], phi_u.parts[k]));
    return concat_cols(summed);
}

/// Region-wise shuffling operator S: registry unit u comes from phi_j when
/// its bit is set, from phi_i otherwise; globals always come from phi_i.
inline PartSet part_shuffle(const PartSet& phi_i, const PartSet& phi_j, const ShuffleMask& mask) {
    if (phi_i.layout != phi_j.layout)
        throw std::invalid_argument("part_shuffle: layout mismatch");
    if (mask.bits.size() != mask.registry.size())
        throw std::invalid_argument("part_shuffle: malformed mask");
    PartSet out = phi_i;
    for (std::size_t u = 0; u < mask.registry.size(); ++u) {
        if (!mask.bits[u]) continue;
        auto [branch, strip] = mask.registry[u];
        int k = phi_i.layout.part_index(branch, strip);
        out.parts[static_cast<std::size_t>(k)] = phi_j.parts[static_cast<std::size_t>(k)];
    }
    return out;
}

}  // namespace isgan::disentangle

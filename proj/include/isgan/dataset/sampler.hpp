#pragma once

#include <cstdlib>
#include <thread>

#include "isgan/dataset/augment.hpp"

namespace isgan::data {

/// Identity-balanced batch: P identities x K images, each image paired with a
/// distinct same-identity positive.
struct PKBatch {
    Tensor images;                              // [P*K, 3, H, W]
    std::vector<int> labels;                    // P*K
    std::vector<std::pair<int, int>> pairs;     // (anchor_idx, positive_idx), one per image
    std::vector<int> record_indices;            // source record per batch slot
};

struct PKIndices {
    std::vector<int> record_indices;
    std::vector<int> labels;
    std::vector<std::pair<int, int>> pairs;
};

/// Draws the identity/image indices of a PK batch. Identities with fewer
/// than K images are sampled with replacement so tiny datasets stay usable.
inline PKIndices pk_sample_indices(const std::vector<ImageRecord>& records, int P, int K,
                                   RngStream rng) {
    if (P < 1 || K < 2) throw std::invalid_argument("pk_sample: requires P >= 1, K >= 2");
    std::map<int, std::vector<int>> by_id;
    for (std::size_t i = 0; i < records.size(); ++i)
        by_id[records[i].identity].push_back(static_cast<int>(i));
    if (static_cast<int>(by_id.size()) < P)
        throw std::invalid_argument("pk_sample: fewer than P identities in the pool");

    std::vector<int> ids;
    ids.reserve(by_id.size());
    for (const auto& [id, v] : by_id) ids.push_back(id);
    // Fisher-Yates prefix of size P
    for (int i = 0; i < P; ++i) {
        int j = i + rng.uniform_int(static_cast<int>(ids.size()) - i);
        std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
    }

    PKIndices out;
    for (int pi = 0; pi < P; ++pi) {
        const auto& pool = by_id[ids[static_cast<std::size_t>(pi)]];
        std::vector<int> chosen;
        if (static_cast<int>(pool.size()) >= K) {
            std::vector<int> tmp = pool;
            for (int i = 0; i < K; ++i) {
                int j = i + rng.uniform_int(static_cast<int>(tmp.size()) - i);
                std::swap(tmp[static_cast<std::size_t>(i)], tmp[static_cast<std::size_t>(j)]);
                chosen.push_back(tmp[static_cast<std::size_t>(i)]);
            }
        } else {
            for (int i = 0; i < K; ++i)
                chosen.push_back(pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))]);
        }
        for (int idx : chosen) {
            out.record_indices.push_back(idx);
            out.labels.push_back(ids[static_cast<std::size_t>(pi)]);
        }
    }
    // one random distinct positive per anchor
    int n = P * K;
    for (int a = 0; a < n; ++a) {
        int group = a / K;
        int pos;
        do {
            pos = group * K + rng.uniform_int(K);
        } while (pos == a);
        out.pairs.emplace_back(a, pos);
    }
    return out;
}

inline int env_num_workers() {
    const char* v = std::getenv("ISGAN_NUM_WORKERS");
    if (!v) return 1;
    int n = std::atoi(v);
    return n > 0 ? n : 1;
}

/// Augments batch slots into an image stack. Each slot draws from a stream
/// derived from (aug_rng, slot), so the result is independent of the worker
/// count.
inline Tensor materialize_batch(const std::vector<ImageRecord>& records,
                                const std::vector<int>& indices, const AugmentPolicy& policy,
                                RngStream aug_rng, int n_workers = 1) {
    Tensor out({static_cast<int>(indices.size()), 3, policy.target_h, policy.target_w});
    std::int64_t sz = static_cast<std::int64_t>(3) * policy.target_h * policy.target_w;
    auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Tensor img = augment(records[static_cast<std::size_t>(indices[i])],
                                 aug_rng.derive(static_cast<std::uint64_t>(i)), policy);
            std::copy(img.data(), img.data() + sz, out.data() + static_cast<std::int64_t>(i) * sz);
        }
    };
    n_workers = std::min<int>(n_workers, static_cast<int>(indices.size()));
    if (n_workers <= 1) {
        work(0, indices.size());
    } else {
        std::vector<std::thread> threads;
        std::size_t chunk = (indices.size() + n_workers - 1) / n_workers;
        for (int t = 0; t < n_workers; ++t) {
            std::size_t lo = static_cast<std::size_t>(t) * chunk;
            std::size_t hi = std::min(indices.size(), lo + chunk);
            if (lo < hi) threads.emplace_back(work, lo, hi);
        }
        for (auto& th : threads) th.join();
    }
    return out;
}

inline PKBatch pk_sample(const std::vector<ImageRecord>& records, int P, int K, RngStream rng,
                         const AugmentPolicy& policy, int n_workers = 1) {
    PKIndices idx = pk_sample_indices(records, P, K, rng.derive_str("indices"));
    PKBatch batch;
    batch.images = materialize_batch(records, idx.record_indices, policy,
                                     rng.derive_str("augment"), n_workers);
    batch.labels = std::move(idx.labels);
    batch.pairs = std::move(idx.pairs);
    batch.record_indices = std::move(idx.record_indices);
    return batch;
}

}  // namespace isgan::data

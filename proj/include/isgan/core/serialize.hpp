#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "isgan/core/tensor.hpp"

namespace isgan {

/// Versioned binary container: a JSON metadata string plus named double
/// tensors, written little-endian so round-trips are bit-exact on the
/// platforms we target. Writes go to a temp file renamed into place.
namespace blobio {

inline constexpr char kMagic[8] = {'I', 'S', 'G', 'A', 'N', 'B', 'L', '1'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {
template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("blobio: truncated file");
    return v;
}
}  // namespace detail

inline void write_file(const std::string& path, const std::string& meta_json,
                       const std::map<std::string, Tensor>& blobs) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("blobio: cannot open " + tmp.string());
        os.write(kMagic, sizeof(kMagic));
        detail::put<std::uint32_t>(os, kVersion);
        detail::put<std::uint64_t>(os, meta_json.size());
        os.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
        detail::put<std::uint64_t>(os, blobs.size());
        for (const auto& [name, t] : blobs) {
            detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
            for (int d : t.shape()) detail::put<std::int32_t>(os, d);
            os.write(reinterpret_cast<const char*>(t.data()),
                     static_cast<std::streamsize>(t.numel() * sizeof(double)));
        }
        if (!os) throw std::runtime_error("blobio: write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

struct File {
    std::string meta_json;
    std::map<std::string, Tensor> blobs;
};

inline File read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("blobio: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("blobio: bad magic in " + path);
    auto version = detail::get<std::uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("blobio: unsupported version " + std::to_string(version));
    File f;
    auto meta_len = detail::get<std::uint64_t>(is);
    f.meta_json.resize(meta_len);
    is.read(f.meta_json.data(), static_cast<std::streamsize>(meta_len));
    auto n = detail::get<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < n; ++i) {
        auto name_len = detail::get<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        auto ndim = detail::get<std::uint32_t>(is);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = detail::get<std::int32_t>(is);
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!is) throw std::runtime_error("blobio: truncated blob " + name);
        f.blobs.emplace(std::move(name), std::move(t));
    }
    return f;
}

}  // namespace blobio
}  // namespace isgan

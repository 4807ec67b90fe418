#pragma once

#include <filesystem>
#include <string>

#include "isgan/core/rng.hpp"
#include "isgan/core/tensor.hpp"

namespace testutil {

inline isgan::Tensor random_tensor(std::vector<int> shape, isgan::RngStream rng, double scale = 1.0) {
    isgan::Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
    return t;
}

/// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        dir_ = std::filesystem::temp_directory_path() /
               ("isgan_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    const std::filesystem::path& path() const { return dir_; }
    std::string str() const { return dir_.string(); }

private:
    std::filesystem::path dir_;
};

}  // namespace testutil

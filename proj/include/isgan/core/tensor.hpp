#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace isgan {

/// Dense row-major double tensor. All numerics in this library run in double
/// precision so finite-difference checks are meaningful.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

    static Tensor scalar(double v) {
        Tensor t({1});
        t.data_[0] = v;
        return t;
    }

    static Tensor from(std::vector<int> shape, std::vector<double> data) {
        Tensor t;
        t.shape_ = std::move(shape);
        if (static_cast<std::int64_t>(data.size()) != checked_numel(t.shape_))
            throw std::invalid_argument("Tensor::from: data size does not match shape");
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(std::int64_t i) { return data_.at(static_cast<std::size_t>(i)); }
    double at(std::int64_t i) const { return data_.at(static_cast<std::size_t>(i)); }

    // NCHW helpers
    std::int64_t idx4(int n, int c, int h, int w) const {
        return ((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }
    std::int64_t idx3(int c, int h, int w) const {
        return (static_cast<std::int64_t>(c) * shape_[1] + h) * shape_[2] + w;
    }
    std::int64_t idx2(int r, int c) const {
        return static_cast<std::int64_t>(r) * shape_[1] + c;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor reshaped(std::vector<int> shape) const {
        if (checked_numel(shape) != numel())
            throw std::invalid_argument("Tensor::reshaped: numel mismatch " + shape_string() );
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    void add_(const Tensor& o) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    }
    void axpy_(double a, const Tensor& o) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
    }
    void scale_(double a) {
        for (auto& v : data_) v *= a;
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_string() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            os << (i ? "," : "") << shape_[i];
        os << "]";
        return os.str();
    }

private:
    static std::int64_t checked_numel(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

inline bool allclose(const Tensor& a, const Tensor& b, double atol = 1e-12, double rtol = 0.0) {
    if (!a.same_shape(b)) return false;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        double tol = atol + rtol * std::abs(b[i]);
        if (std::abs(a[i] - b[i]) > tol) return false;
    }
    return true;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace isgan

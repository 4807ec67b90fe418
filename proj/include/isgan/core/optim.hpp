#pragma once

#include <map>
#include <string>
#include <vector>

#include "isgan/core/nn.hpp"

namespace isgan {

/// Adam with bias correction. A param with no accumulated gradient this step
/// is treated as having a zero gradient so moment bookkeeping stays in sync.
class Adam {
public:
    Adam() = default;
    explicit Adam(std::vector<NamedParam> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params_)
            slots_.push_back({Tensor(p.var->value().shape()), Tensor(p.var->value().shape())});
    }

    void step(double lr) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Tensor& value = params_[k].var->value();
            const Tensor* grad = params_[k].var->has_grad() ? &params_[k].var->grad() : nullptr;
            Tensor& m = slots_[k].m;
            Tensor& v = slots_[k].v;
            for (std::int64_t i = 0; i < value.numel(); ++i) {
                double g = grad ? (*grad)[i] : 0.0;
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
        }
    }

    void zero_grad() { zero_grads(params_); }
    const std::vector<NamedParam>& params() const { return params_; }

    void export_state(const std::string& prefix, std::map<std::string, Tensor>& out) const {
        out[prefix + ".t"] = Tensor::scalar(static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            out[prefix + "." + params_[k].name + ".m"] = slots_[k].m;
            out[prefix + "." + params_[k].name + ".v"] = slots_[k].v;
        }
    }
    void import_state(const std::string& prefix, const std::map<std::string, Tensor>& in) {
        t_ = static_cast<std::int64_t>(in.at(prefix + ".t")[0]);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            slots_[k].m = in.at(prefix + "." + params_[k].name + ".m");
            slots_[k].v = in.at(prefix + "." + params_[k].name + ".v");
        }
    }

private:
    struct Slot {
        Tensor m, v;
    };
    std::vector<NamedParam> params_;
    std::vector<Slot> slots_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
};

class SgdMomentum {
public:
    SgdMomentum() = default;
    explicit SgdMomentum(std::vector<NamedParam> params, double momentum = 0.9)
        : params_(std::move(params)), momentum_(momentum) {
        for (const auto& p : params_) bufs_.push_back(Tensor(p.var->value().shape()));
    }

    void step(double lr) {
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Tensor& value = params_[k].var->value();
            const Tensor* grad = params_[k].var->has_grad() ? &params_[k].var->grad() : nullptr;
            Tensor& buf = bufs_[k];
            for (std::int64_t i = 0; i < value.numel(); ++i) {
                double g = grad ? (*grad)[i] : 0.0;
                buf[i] = momentum_ * buf[i] + g;
                value[i] -= lr * buf[i];
            }
        }
    }

    void zero_grad() { zero_grads(params_); }
    const std::vector<NamedParam>& params() const { return params_; }

    void export_state(const std::string& prefix, std::map<std::string, Tensor>& out) const {
        for (std::size_t k = 0; k < params_.size(); ++k)
            out[prefix + "." + params_[k].name + ".buf"] = bufs_[k];
    }
    void import_state(const std::string& prefix, const std::map<std::string, Tensor>& in) {
        for (std::size_t k = 0; k < params_.size(); ++k)
            bufs_[k] = in.at(prefix + "." + params_[k].name + ".buf");
    }

private:
    std::vector<NamedParam> params_;
    std::vector<Tensor> bufs_;
    double momentum_ = 0.9;
};

}  // namespace isgan

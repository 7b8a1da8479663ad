#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cnet/checkpoint.hpp"
#include "cnet/error.hpp"
#include "cnet/tensor.hpp"

namespace cnet {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
            throw ConfigError("adam: betas must be in [0, 1)");
        }
        if (!(eps > 0.0)) {
            throw ConfigError("adam: eps must be > 0");
        }
    }
};

/// Adam with bias correction over a fixed list of named parameters. Moment
/// buffers live here; their serialized names are the parameter names under
/// "adam.m." / "adam.v." prefixes.
template <class T>
class Adam {
public:
    Adam(std::vector<std::pair<std::string, TensorPtr<T>>> params, AdamConfig config = {})
        : params_(std::move(params)), cfg_(config) {
        cfg_.validate();
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& [name, p] : params_) {
            m_.emplace_back(static_cast<std::size_t>(p->numel()), T(0));
            v_.emplace_back(static_cast<std::size_t>(p->numel()), T(0));
        }
    }

    std::uint64_t step_count() const { return t_; }

    void zero_grad() {
        for (auto& [name, p] : params_) {
            p->zero_grad();
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const T b1 = static_cast<T>(cfg_.beta1);
        const T b2 = static_cast<T>(cfg_.beta2);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& p = *params_[pi].second;
            const T* g = p.grad_data();
            T* theta = p.data();
            T* m = m_[pi].data();
            T* v = v_[pi].data();
            const std::int64_t count = p.numel();
            for (std::int64_t i = 0; i < count; ++i) {
                m[i] = b1 * m[i] + (T(1) - b1) * g[i];
                v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
                const double mhat = static_cast<double>(m[i]) / bc1;
                const double vhat = static_cast<double>(v[i]) / bc2;
                theta[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
        }
    }

    std::vector<TensorRecord<T>> state_records() const {
        std::vector<TensorRecord<T>> out;
        out.reserve(params_.size() * 2);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            const auto& [name, p] = params_[pi];
            out.push_back(TensorRecord<T>{"adam.m." + name, p->shape(), m_[pi]});
            out.push_back(TensorRecord<T>{"adam.v." + name, p->shape(), v_[pi]});
        }
        return out;
    }

    void load_state(const std::vector<TensorRecord<T>>& records, std::uint64_t step) {
        std::unordered_map<std::string, const TensorRecord<T>*> by_name;
        for (const auto& rec : records) {
            by_name.emplace(rec.name, &rec);
        }
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            const auto& [name, p] = params_[pi];
            for (const char* prefix : {"adam.m.", "adam.v."}) {
                const auto it = by_name.find(prefix + name);
                if (it == by_name.end()) {
                    throw IoError("optimizer state is missing \"" + (prefix + name) + "\"");
                }
                const auto& rec = *it->second;
                if (static_cast<std::int64_t>(rec.values.size()) != p->numel()) {
                    throw IoError("optimizer state \"" + rec.name + "\" has " +
                                  std::to_string(rec.values.size()) + " values, expected " +
                                  std::to_string(p->numel()));
                }
                (prefix[5] == 'm' ? m_ : v_)[pi] = rec.values;
            }
        }
        t_ = step;
    }

private:
    std::vector<std::pair<std::string, TensorPtr<T>>> params_;
    AdamConfig cfg_;
    std::vector<std::vector<T>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace cnet

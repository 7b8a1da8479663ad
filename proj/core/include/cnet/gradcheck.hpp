#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cnet/rng.hpp"
#include "cnet/tensor.hpp"

namespace cnet {

struct GradCheckOptions {
    double step = 1e-5;
    /// Denominator floor in |a - n| / max(floor, |a| + |n|).
    double floor = 1e-8;
    /// 0 checks every coordinate; otherwise at most this many per parameter,
    /// drawn without replacement from sample_seed.
    std::int64_t max_coords_per_param = 0;
    std::uint64_t sample_seed = 0;
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_param = 0;
    std::int64_t worst_coord = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::int64_t coords_checked = 0;

    bool ok(double tol) const { return max_rel_err < tol; }

    std::string describe() const {
        return "max rel err " + std::to_string(max_rel_err) + " at param " +
               std::to_string(worst_param) + " coord " + std::to_string(worst_coord) +
               " (analytic " + std::to_string(worst_analytic) + ", numeric " +
               std::to_string(worst_numeric) + ", " + std::to_string(coords_checked) +
               " coords)";
    }
};

/// Central-difference gradient check. `build_loss` must rebuild the graph and
/// return a scalar loss as a pure function of the current parameter values;
/// any state it touches (running statistics, random draws) has to be reset
/// inside it.
template <class T>
GradCheckResult grad_check(const std::function<TensorPtr<T>()>& build_loss,
                           const std::vector<TensorPtr<T>>& params,
                           const GradCheckOptions& opt = {}) {
    for (const auto& p : params) {
        p->set_requires_grad(true);
        p->zero_grad();
    }
    auto loss = build_loss();
    loss->backward();
    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        auto g = p->grad();
        analytic.emplace_back(g.begin(), g.end());
    }

    GradCheckResult result;
    RandomStream rng(opt.sample_seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        const std::int64_t count = p.numel();
        std::vector<std::int64_t> coords;
        if (opt.max_coords_per_param > 0 && count > opt.max_coords_per_param) {
            // Partial Fisher-Yates draw of max_coords distinct coordinates.
            std::vector<std::int64_t> pool(static_cast<std::size_t>(count));
            for (std::int64_t i = 0; i < count; ++i) {
                pool[static_cast<std::size_t>(i)] = i;
            }
            for (std::int64_t i = 0; i < opt.max_coords_per_param; ++i) {
                const std::int64_t j =
                    i + static_cast<std::int64_t>(rng.uniform_index(
                            static_cast<std::uint64_t>(count - i)));
                std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
                coords.push_back(pool[static_cast<std::size_t>(i)]);
            }
        } else {
            coords.resize(static_cast<std::size_t>(count));
            for (std::int64_t i = 0; i < count; ++i) {
                coords[static_cast<std::size_t>(i)] = i;
            }
        }

        T* values = p.data();
        for (std::int64_t ci : coords) {
            const T saved = values[ci];
            values[ci] = saved + static_cast<T>(opt.step);
            const double plus = static_cast<double>(build_loss()->item());
            values[ci] = saved - static_cast<T>(opt.step);
            const double minus = static_cast<double>(build_loss()->item());
            values[ci] = saved;

            const double numeric = (plus - minus) / (2.0 * opt.step);
            const double a = static_cast<double>(analytic[pi][static_cast<std::size_t>(ci)]);
            const double denom = std::max(opt.floor, std::abs(a) + std::abs(numeric));
            const double rel = std::abs(a - numeric) / denom;
            ++result.coords_checked;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_param = pi;
                result.worst_coord = ci;
                result.worst_analytic = a;
                result.worst_numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace cnet

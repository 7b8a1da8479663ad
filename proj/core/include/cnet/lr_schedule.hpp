#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "cnet/error.hpp"

namespace cnet {

/// Polynomial decay: base * (1 - iter/max_iter)^power, evaluated per
/// iteration. Exact at both ends: iter 0 gives base, iter max_iter gives 0.
inline double poly_lr(double base_lr, std::int64_t iter, std::int64_t max_iter, double power) {
    if (max_iter < 1) {
        throw ConfigError("poly_lr: max_iter must be positive, got " + std::to_string(max_iter));
    }
    if (iter < 0 || iter > max_iter) {
        throw ConfigError("poly_lr: iter " + std::to_string(iter) + " outside [0, " +
                          std::to_string(max_iter) + "]");
    }
    if (!(power > 0.0)) {
        throw ConfigError("poly_lr: power must be > 0, got " + std::to_string(power));
    }
    if (!(base_lr > 0.0)) {
        throw ConfigError("poly_lr: base_lr must be > 0, got " + std::to_string(base_lr));
    }
    const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(max_iter);
    return base_lr * std::pow(frac, power);
}

}  // namespace cnet

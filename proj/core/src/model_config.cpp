#include "cnet/model_config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "cnet/error.hpp"
#include "cnet/vocab.hpp"

namespace cnet {

void ModelConfig::validate() const {
    if (input_size < 16 || input_size % 16 != 0) {
        throw ConfigError("model: input_size must be a positive multiple of 16, got " +
                          std::to_string(input_size));
    }
    if (!(width_multiplier > 0.0)) {
        throw ConfigError("model: width_multiplier must be > 0, got " +
                          std::to_string(width_multiplier));
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw ConfigError("model: dropout_p must be in [0, 1), got " + std::to_string(dropout_p));
    }
    if (pool_scales.empty()) {
        throw ConfigError("model: pool_scales must not be empty");
    }
    std::set<std::int64_t> seen;
    for (std::int64_t s : pool_scales) {
        if (s < 1 || s > final_grid()) {
            throw ConfigError("model: pool scale " + std::to_string(s) +
                              " does not fit the final " + std::to_string(final_grid()) + "x" +
                              std::to_string(final_grid()) + " feature map");
        }
        if (!seen.insert(s).second) {
            throw ConfigError("model: duplicate pool scale " + std::to_string(s));
        }
    }
}

std::int64_t ModelConfig::scaled(std::int64_t channels) const {
    const double raw = static_cast<double>(channels) * width_multiplier;
    const auto c = static_cast<std::int64_t>(std::ceil(raw - 1e-9));
    return c < 1 ? 1 : c;
}

std::int64_t ModelConfig::psp_level_channels() const {
    const std::int64_t per = scaled(2048) / static_cast<std::int64_t>(pool_scales.size());
    return per < 1 ? 1 : per;
}

std::string shape_trace(const ModelConfig& config) {
    config.validate();
    std::ostringstream os;
    const auto row4 = [&os](const char* name, std::int64_t c, std::int64_t hw) {
        os << name << ": n x " << c << " x " << hw << " x " << hw << '\n';
    };
    const auto row2 = [&os](const char* name, std::int64_t c) {
        os << name << ": n x " << c << '\n';
    };

    const std::int64_t s = config.input_size;
    const std::int64_t half = s / 2;
    row4("Input", 3, s);
    row4("Conv1", config.scaled(32), s);
    row4("Conv2", config.scaled(32), s);
    row4("W1", config.scaled(32), s);
    row4("Conv3", config.scaled(32), half);
    row4("Conv4", config.scaled(64), half);
    row4("Conv5", config.scaled(64), half);
    row4("W2", config.scaled(64), half);
    row4("Conv6", config.scaled(64), half);
    row4("Layer1", config.scaled(256), half);
    row4("Layer2", config.scaled(512), s / 4);
    row4("Layer3", config.scaled(1024), s / 8);
    row4("Layer4", config.scaled(2048), s / 16);
    const std::int64_t psp_c =
        config.scaled(2048) +
        static_cast<std::int64_t>(config.pool_scales.size()) * config.psp_level_channels();
    row4("PSP", psp_c, config.final_grid());
    row4("ConvPSP", config.scaled(1024), 1);
    row4("FC1", config.scaled(256), 1);
    row4("FC2", kNumCuisines, 1);
    row2("FC_C", kNumCuisines);
    row4("FC1", config.scaled(512), 1);
    row4("FC2", config.scaled(128), 1);
    row4("FC3", kNumFlavors, 1);
    row2("FC_F", kNumFlavors);
    return os.str();
}

}  // namespace cnet

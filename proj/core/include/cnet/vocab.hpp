#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cnet {

inline constexpr std::int64_t kNumCuisines = 10;
inline constexpr std::int64_t kNumFlavors = 6;

/// Cuisine class names in label-index order. The order is part of the data
/// contract: label ids, checkpoint heads, and reports all use it.
std::span<const std::string_view> cuisine_names();

/// Flavor class names in label-index order; also the tie-break order when a
/// sample has several equally strong flavor scores.
std::span<const std::string_view> flavor_names();

/// Index of `name` in the cuisine table; throws DataError on unknown names.
std::int64_t cuisine_index(std::string_view name);

/// Index of `name` in the flavor table; throws DataError on unknown names.
std::int64_t flavor_index(std::string_view name);

std::string cuisine_name(std::int64_t index);
std::string flavor_name(std::int64_t index);

}  // namespace cnet

#include "cnet/vocab.hpp"

#include <array>

#include "cnet/error.hpp"

namespace cnet {

namespace {

constexpr std::array<std::string_view, kNumCuisines> kCuisines{
    "American", "Chinese", "French",  "Greek",   "Italian",
    "Indian",   "Japanese", "Mexican", "Spanish", "Thai",
};

constexpr std::array<std::string_view, kNumFlavors> kFlavors{
    "Bitter", "Meaty", "Piquant", "Salty", "Sour", "Sweet",
};

std::int64_t find(std::span<const std::string_view> table, std::string_view name,
                  const char* kind) {
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i] == name) {
            return static_cast<std::int64_t>(i);
        }
    }
    throw DataError(std::string("unknown ") + kind + " name: \"" + std::string(name) + "\"");
}

void check_index(std::int64_t index, std::int64_t count, const char* kind) {
    if (index < 0 || index >= count) {
        throw DataError(std::string(kind) + " index " + std::to_string(index) +
                        " out of range [0, " + std::to_string(count) + ")");
    }
}

}  // namespace

std::span<const std::string_view> cuisine_names() { return kCuisines; }

std::span<const std::string_view> flavor_names() { return kFlavors; }

std::int64_t cuisine_index(std::string_view name) { return find(kCuisines, name, "cuisine"); }

std::int64_t flavor_index(std::string_view name) { return find(kFlavors, name, "flavor"); }

std::string cuisine_name(std::int64_t index) {
    check_index(index, kNumCuisines, "cuisine");
    return std::string(kCuisines[static_cast<std::size_t>(index)]);
}

std::string flavor_name(std::int64_t index) {
    check_index(index, kNumFlavors, "flavor");
    return std::string(kFlavors[static_cast<std::size_t>(index)]);
}

}  // namespace cnet

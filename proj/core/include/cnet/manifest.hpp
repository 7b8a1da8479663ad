#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cnet/vocab.hpp"

namespace cnet {

enum class Split { kNone, kTrain, kVal, kTest };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct Sample {
    std::string path;
    std::int64_t cuisine = -1;
    std::array<double, kNumFlavors> flavor_scores{};
    /// Dominant flavor, derived from the scores at parse time.
    std::int64_t flavor = -1;
    Split split = Split::kNone;
};

/// Dominant flavor index: the highest score wins, and on exact ties the
/// flavor earliest in vocabulary order does. Input is indexed by flavor id,
/// so the file's pair order cannot influence the result.
std::int64_t reduce_flavor(std::span<const double> scores);

/// Tab-separated manifest: image path, cuisine name, six Flavor=score pairs
/// in any order, optionally a trailing split=train|val|test field. '#' starts
/// a comment; blank lines are skipped. Errors carry 1-based line numbers.
std::vector<Sample> parse_manifest(const std::filesystem::path& path);
std::vector<Sample> parse_manifest_text(const std::string& text, const std::string& origin);

/// Inverse of parse: floats round-trip exactly.
std::string serialize_manifest(std::span<const Sample> samples);
void write_manifest(const std::filesystem::path& path, std::span<const Sample> samples);

/// Assigns splits stratified by cuisine with a 70/15/15 largest-remainder
/// allocation per class; rounding leftovers go to train, then val, then test.
/// Requires that no sample carries a preassigned split.
void stratified_split(std::vector<Sample>& samples, std::uint64_t seed);

/// True when every sample has an explicit split; throws if only some do.
bool has_explicit_splits(std::span<const Sample> samples);

std::vector<const Sample*> samples_in_split(std::span<const Sample> samples, Split split);

}  // namespace cnet

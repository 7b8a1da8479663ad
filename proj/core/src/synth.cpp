#include "cnet/synth.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "cnet/error.hpp"
#include "cnet/image.hpp"
#include "cnet/rng.hpp"

namespace cnet {

namespace {

// Fully saturated hue as RGB in [0, 1].
std::array<double, 3> hue_rgb(double degrees) {
    const double h = degrees / 60.0;
    const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
    switch (static_cast<int>(h) % 6) {
        case 0: return {1.0, x, 0.0};
        case 1: return {x, 1.0, 0.0};
        case 2: return {0.0, 1.0, x};
        case 3: return {0.0, x, 1.0};
        case 4: return {x, 0.0, 1.0};
        default: return {1.0, 0.0, x};
    }
}

// Each cuisine sits 36 degrees apart on the hue wheel, softened toward white
// and normalized to unit sum so brightness carries no cuisine information.
std::array<double, 3> cuisine_chroma(std::int64_t cuisine) {
    const auto h = hue_rgb(36.0 * static_cast<double>(cuisine));
    std::array<double, 3> b{};
    double sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        b[static_cast<std::size_t>(ch)] = 0.55 * h[static_cast<std::size_t>(ch)] + 0.45 / 3.0;
        sum += b[static_cast<std::size_t>(ch)];
    }
    for (double& v : b) {
        v /= sum;
    }
    return b;
}

std::string slug(std::string s) {
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

double round_4dp(double v) { return std::round(v * 10000.0) / 10000.0; }

}  // namespace

std::vector<Sample> synth_dataset(std::int64_t per_pair, std::uint64_t seed,
                                  const std::filesystem::path& out_dir,
                                  std::int64_t image_size) {
    if (per_pair < 1) {
        throw ConfigError("synth_dataset: per_pair must be >= 1, got " +
                          std::to_string(per_pair));
    }
    if (image_size < 8) {
        throw ConfigError("synth_dataset: image_size must be >= 8, got " +
                          std::to_string(image_size));
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory " + out_dir.string());
    }

    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(kNumCuisines * kNumFlavors * per_pair));
    for (std::int64_t c = 0; c < kNumCuisines; ++c) {
        const auto chroma = cuisine_chroma(c);
        const std::int64_t period = 3 + c;
        for (std::int64_t f = 0; f < kNumFlavors; ++f) {
            const double brightness = 0.35 + 0.11 * static_cast<double>(f);
            // Concentric rings whose spacing is set by the flavor: a second,
            // spatial route to the same label that survives flips, small
            // rotations, and normalization layers.
            const double ring_period = 3.0 + static_cast<double>(f);
            const double center = static_cast<double>(image_size - 1) / 2.0;
            for (std::int64_t k = 0; k < per_pair; ++k) {
                RandomStream rng(derive_seed(
                    seed, "synth", static_cast<std::uint64_t>(c * kNumFlavors + f),
                    static_cast<std::uint64_t>(k)));
                Image img = make_image(image_size, image_size);
                for (std::int64_t y = 0; y < image_size; ++y) {
                    for (std::int64_t x = 0; x < image_size; ++x) {
                        const double stripe = ((x + y) % period) == 0 ? 1.0 : 0.0;
                        const double r = std::hypot(static_cast<double>(x) - center,
                                                    static_cast<double>(y) - center);
                        const double ring =
                            std::sin(2.0 * 3.14159265358979323846 * r / ring_period);
                        const double pattern = 0.8 + 0.1 * stripe + 0.08 * ring;
                        for (std::int64_t ch = 0; ch < 3; ++ch) {
                            // Peaks at 1.5 * 0.7 * 0.90 * 0.98 < 0.95, so even
                            // with noise nothing clips and the statistics stay
                            // linear in the encoded labels.
                            const double v =
                                1.5 * chroma[static_cast<std::size_t>(ch)] * brightness *
                                    pattern +
                                rng.uniform(-0.02, 0.02);
                            img.at(ch, y, x) =
                                static_cast<float>(std::clamp(v, 0.0, 1.0));
                        }
                    }
                }

                Sample s;
                s.path = slug(cuisine_name(c)) + "_" + slug(flavor_name(f)) + "_" +
                         std::to_string(k) + ".ppm";
                s.cuisine = c;
                for (std::int64_t g = 0; g < kNumFlavors; ++g) {
                    s.flavor_scores[static_cast<std::size_t>(g)] = round_4dp(
                        g == f ? rng.uniform(0.7, 1.0) : rng.uniform(0.0, 0.6));
                }
                s.flavor = reduce_flavor(s.flavor_scores);
                save_ppm(out_dir / s.path, img);
                samples.push_back(std::move(s));
            }
        }
    }
    write_manifest(out_dir / "manifest.tsv", samples);
    return samples;
}

}  // namespace cnet

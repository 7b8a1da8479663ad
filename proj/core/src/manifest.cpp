#include "cnet/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cnet/error.hpp"
#include "cnet/rng.hpp"

namespace cnet {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

double parse_score(const std::string& text, const std::string& flavor,
                   const std::string& where) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw DataError(where + ": bad " + flavor + " score \"" + text + "\"");
    }
    if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError(where + ": " + flavor + " score " + text + " outside [0, 1]");
    }
    return v;
}

std::string format_score(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string split_name(Split s) {
    switch (s) {
        case Split::kTrain:
            return "train";
        case Split::kVal:
            return "val";
        case Split::kTest:
            return "test";
        case Split::kNone:
            break;
    }
    return "";
}

Split split_from_name(const std::string& name) {
    if (name == "train") {
        return Split::kTrain;
    }
    if (name == "val") {
        return Split::kVal;
    }
    if (name == "test") {
        return Split::kTest;
    }
    throw DataError("unknown split \"" + name + "\"");
}

std::int64_t reduce_flavor(std::span<const double> scores) {
    if (scores.size() != static_cast<std::size_t>(kNumFlavors)) {
        throw DataError("reduce_flavor: expected " + std::to_string(kNumFlavors) +
                        " scores, got " + std::to_string(scores.size()));
    }
    std::int64_t best = 0;
    for (std::int64_t f = 1; f < kNumFlavors; ++f) {
        if (scores[static_cast<std::size_t>(f)] > scores[static_cast<std::size_t>(best)]) {
            best = f;
        }
    }
    return best;
}

std::vector<Sample> parse_manifest_text(const std::string& text, const std::string& origin) {
    std::vector<Sample> samples;
    std::istringstream is(text);
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const std::string where = origin + ":" + std::to_string(line_no);
        const auto fields = split_tabs(line);
        if (fields.size() < 2 + static_cast<std::size_t>(kNumFlavors) ||
            fields.size() > 3 + static_cast<std::size_t>(kNumFlavors)) {
            throw DataError(where + ": expected path, cuisine, " + std::to_string(kNumFlavors) +
                            " flavor scores and an optional split, got " +
                            std::to_string(fields.size()) + " fields");
        }
        Sample s;
        s.path = fields[0];
        if (s.path.empty()) {
            throw DataError(where + ": empty image path");
        }
        try {
            s.cuisine = cuisine_index(fields[1]);
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }

        std::array<bool, kNumFlavors> seen{};
        std::size_t field = 2;
        for (; field < 2 + static_cast<std::size_t>(kNumFlavors); ++field) {
            const std::string& pair = fields[field];
            const std::size_t eq = pair.find('=');
            if (eq == std::string::npos) {
                throw DataError(where + ": flavor field \"" + pair + "\" is not name=score");
            }
            std::int64_t f = -1;
            try {
                f = flavor_index(pair.substr(0, eq));
            } catch (const DataError& e) {
                throw DataError(where + ": " + e.what());
            }
            if (seen[static_cast<std::size_t>(f)]) {
                throw DataError(where + ": flavor " + flavor_name(f) + " listed twice");
            }
            seen[static_cast<std::size_t>(f)] = true;
            s.flavor_scores[static_cast<std::size_t>(f)] =
                parse_score(pair.substr(eq + 1), flavor_name(f), where);
        }
        if (field < fields.size()) {
            const std::string& extra = fields[field];
            if (extra.rfind("split=", 0) != 0) {
                throw DataError(where + ": unexpected trailing field \"" + extra + "\"");
            }
            try {
                s.split = split_from_name(extra.substr(6));
            } catch (const DataError& e) {
                throw DataError(where + ": " + e.what());
            }
        }
        s.flavor = reduce_flavor(s.flavor_scores);
        samples.push_back(std::move(s));
    }
    if (samples.empty()) {
        throw DataError(origin + ": manifest holds no samples");
    }
    return samples;
}

std::vector<Sample> parse_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open manifest " + path.string());
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_manifest_text(buf.str(), path.string());
}

std::string serialize_manifest(std::span<const Sample> samples) {
    std::ostringstream os;
    for (const Sample& s : samples) {
        os << s.path << '\t' << cuisine_name(s.cuisine);
        for (std::int64_t f = 0; f < kNumFlavors; ++f) {
            os << '\t' << flavor_name(f) << '='
               << format_score(s.flavor_scores[static_cast<std::size_t>(f)]);
        }
        if (s.split != Split::kNone) {
            os << "\tsplit=" << split_name(s.split);
        }
        os << '\n';
    }
    return os.str();
}

void write_manifest(const std::filesystem::path& path, std::span<const Sample> samples) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    os << serialize_manifest(samples);
    if (!os.flush()) {
        throw IoError("failed writing manifest " + path.string());
    }
}

void stratified_split(std::vector<Sample>& samples, std::uint64_t seed) {
    for (const Sample& s : samples) {
        if (s.split != Split::kNone) {
            throw DataError("stratified_split: sample \"" + s.path +
                            "\" already has an explicit split");
        }
    }
    constexpr double kFractions[3] = {0.70, 0.15, 0.15};
    constexpr Split kSplits[3] = {Split::kTrain, Split::kVal, Split::kTest};

    for (std::int64_t cuisine = 0; cuisine < kNumCuisines; ++cuisine) {
        std::vector<std::size_t> group;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].cuisine == cuisine) {
                group.push_back(i);
            }
        }
        if (group.empty()) {
            continue;
        }
        RandomStream rng(derive_seed(seed, "split", static_cast<std::uint64_t>(cuisine)));
        for (std::size_t i = group.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
            std::swap(group[i - 1], group[j]);
        }

        // Largest-remainder allocation; remainder ties resolve in split
        // order, train first.
        const auto n = static_cast<double>(group.size());
        std::int64_t counts[3];
        double fracs[3];
        std::int64_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double target = kFractions[s] * n;
            counts[s] = static_cast<std::int64_t>(target);
            fracs[s] = target - static_cast<double>(counts[s]);
            assigned += counts[s];
        }
        std::int64_t remainder = static_cast<std::int64_t>(group.size()) - assigned;
        int order[3] = {0, 1, 2};
        std::stable_sort(order, order + 3, [&](int a, int b) { return fracs[a] > fracs[b]; });
        for (int k = 0; remainder > 0; k = (k + 1) % 3) {
            ++counts[order[k]];
            --remainder;
        }

        std::size_t cursor = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::int64_t k = 0; k < counts[s]; ++k) {
                samples[group[cursor++]].split = kSplits[s];
            }
        }
    }
}

bool has_explicit_splits(std::span<const Sample> samples) {
    std::size_t with = 0;
    for (const Sample& s : samples) {
        with += s.split != Split::kNone ? 1 : 0;
    }
    if (with == 0) {
        return false;
    }
    if (with != samples.size()) {
        throw DataError("manifest assigns splits to " + std::to_string(with) + " of " +
                        std::to_string(samples.size()) +
                        " samples; either all rows or none must carry split=");
    }
    return true;
}

std::vector<const Sample*> samples_in_split(std::span<const Sample> samples, Split split) {
    std::vector<const Sample*> out;
    for (const Sample& s : samples) {
        if (s.split == split) {
            out.push_back(&s);
        }
    }
    return out;
}

}  // namespace cnet

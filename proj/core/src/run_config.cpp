#include "cnet/run_config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

#include "cnet/error.hpp"
#include "cnet/manifest.hpp"

namespace cnet {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) {
        ++b;
    }
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
    throw ConfigError("config: key \"" + key + "\" expects " + expected + ", got \"" + value +
                      "\"");
}

double parse_double(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        bad_value(key, value, "a number");
    }
    return out;
}

/// Accepts plain decimals and a/b fractions ("1/8").
double parse_ratio(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    const auto slash = v.find('/');
    if (slash == std::string::npos) {
        return parse_double(key, v);
    }
    const double num = parse_double(key, v.substr(0, slash));
    const double den = parse_double(key, v.substr(slash + 1));
    if (den == 0.0) {
        bad_value(key, value, "a nonzero denominator");
    }
    return num / den;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    std::int64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        bad_value(key, value, "an integer");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        bad_value(key, value, "an unsigned integer");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (v == "true" || v == "1") {
        return true;
    }
    if (v == "false" || v == "0") {
        return false;
    }
    bad_value(key, value, "true or false");
}

std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<std::int64_t> out;
    std::string item;
    std::istringstream in(trim(value));
    while (std::getline(in, item, ',')) {
        out.push_back(parse_int(key, item));
    }
    if (out.empty()) {
        bad_value(key, value, "a comma-separated integer list");
    }
    return out;
}

std::string fmt_int_list(const std::vector<std::int64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += std::to_string(v[i]);
    }
    return out;
}

struct KeyHandler {
    const char* key;
    void (*set)(RunConfig&, const std::string&, const std::string&);
    std::string (*get)(const RunConfig&);
};

// Order here is the echo order.
constexpr KeyHandler kKeys[] = {
    {"input_size",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.model.input_size = parse_int(k, v);
     },
     [](const RunConfig& c) { return std::to_string(c.model.input_size); }},
    {"width_multiplier",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.model.width_multiplier = parse_ratio(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.model.width_multiplier); }},
    {"pool_scales",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.model.pool_scales = parse_int_list(k, v);
     },
     [](const RunConfig& c) { return fmt_int_list(c.model.pool_scales); }},
    {"dropout",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.model.dropout_p = parse_double(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.model.dropout_p); }},
    {"base_lr",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.base_lr = parse_double(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.train.base_lr); }},
    {"poly_power",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.poly_power = parse_double(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.train.poly_power); }},
    {"batch_size",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.batch_size = parse_int(k, v);
     },
     [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
    {"epochs",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.epochs = parse_int(k, v);
     },
     [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
    {"beta1",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.adam.beta1 = parse_double(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.train.adam.beta1); }},
    {"beta2",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.adam.beta2 = parse_double(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.train.adam.beta2); }},
    {"eps",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.adam.eps = parse_double(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.train.adam.eps); }},
    {"seed",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.seed = parse_u64(k, v);
     },
     [](const RunConfig& c) { return std::to_string(c.train.seed); }},
    {"alpha_cuisine",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.alpha_cuisine = parse_double(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.train.alpha_cuisine); }},
    {"alpha_flavor",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.alpha_flavor = parse_double(k, v);
     },
     [](const RunConfig& c) { return fmt_double(c.train.alpha_flavor); }},
    {"checkpoint_every",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.checkpoint_every = parse_int(k, v);
     },
     [](const RunConfig& c) { return std::to_string(c.train.checkpoint_every); }},
    {"augment",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.augment = parse_bool(k, v);
     },
     [](const RunConfig& c) { return std::string(c.train.augment ? "true" : "false"); }},
    {"manifest",
     [](RunConfig& c, const std::string&, const std::string& v) { c.manifest = trim(v); },
     [](const RunConfig& c) { return c.manifest; }},
    {"out_dir",
     [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = trim(v); },
     [](const RunConfig& c) { return c.out_dir; }},
    {"report_split",
     [](RunConfig& c, const std::string&, const std::string& v) { c.report_split = trim(v); },
     [](const RunConfig& c) { return c.report_split; }},
    {"eval_batch_size",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.eval_batch_size = parse_int(k, v);
     },
     [](const RunConfig& c) { return std::to_string(c.eval_batch_size); }},
    {"workers",
     [](RunConfig& c, const std::string& k, const std::string& v) {
         c.workers = parse_int(k, v);
     },
     [](const RunConfig& c) { return std::to_string(c.workers); }},
};

}  // namespace

void RunConfig::validate() const {
    model.validate();
    train.validate();
    try {
        split_from_name(report_split);
    } catch (const DataError&) {
        throw ConfigError("config: report_split must be train, val or test, got \"" +
                          report_split + "\"");
    }
    if (eval_batch_size < 1) {
        throw ConfigError("config: eval_batch_size must be >= 1");
    }
    if (workers < 1) {
        throw ConfigError("config: workers must be >= 1");
    }
}

void apply_run_config_entry(RunConfig& config, const std::string& key,
                            const std::string& value) {
    const std::string k = trim(key);
    for (const auto& handler : kKeys) {
        if (k == handler.key) {
            handler.set(config, k, value);
            return;
        }
    }
    throw ConfigError("config: unknown key \"" + k + "\"");
}

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') {
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got \"" + stripped + "\"");
        }
        try {
            apply_run_config_entry(config, stripped.substr(0, eq), stripped.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config_text(text.str(), path.filename().string());
}

std::string serialize_run_config(const RunConfig& config) {
    std::string out;
    for (const auto& handler : kKeys) {
        out += handler.key;
        out += " = ";
        out += handler.get(config);
        out += '\n';
    }
    return out;
}

}  // namespace cnet

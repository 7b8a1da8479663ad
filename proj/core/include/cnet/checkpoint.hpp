#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cnet/error.hpp"
#include "cnet/model.hpp"
#include "cnet/tensor.hpp"

namespace cnet {

template <class T>
struct TensorRecord {
    std::string name;
    Shape shape;
    std::vector<T> values;
};

/// In-memory image of a checkpoint file: the run configuration echo, the
/// model tensors (parameters and running statistics), and optionally the
/// optimizer moments keyed by parameter name.
template <class T>
struct Checkpoint {
    std::string config_text;
    std::vector<TensorRecord<T>> tensors;
    bool has_optimizer = false;
    std::uint64_t optimizer_step = 0;
    std::vector<TensorRecord<T>> optimizer;
};

namespace detail {

inline constexpr char kCheckpointMagic[4] = {'C', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_bytes(std::ostream& os, const void* data, std::size_t count) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(count));
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    }
    put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    }
    put_bytes(os, b, 8);
}

inline void get_bytes(std::istream& is, void* data, std::size_t count) {
    is.read(static_cast<char*>(data), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(is.gcount()) != count) {
        throw IoError("truncated checkpoint");
    }
}

inline std::uint8_t get_u8(std::istream& is) {
    std::uint8_t v = 0;
    get_bytes(is, &v, 1);
    return v;
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    get_bytes(is, b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    }
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    get_bytes(is, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return v;
}

template <class T>
constexpr std::uint8_t dtype_tag() {
    return sizeof(T) == 4 ? 0 : 1;
}

template <class T>
void put_record(std::ostream& os, const TensorRecord<T>& rec) {
    put_u32(os, static_cast<std::uint32_t>(rec.name.size()));
    put_bytes(os, rec.name.data(), rec.name.size());
    put_u8(os, dtype_tag<T>());
    put_u32(os, static_cast<std::uint32_t>(rec.shape.size()));
    for (std::int64_t d : rec.shape) {
        put_u64(os, static_cast<std::uint64_t>(d));
    }
    put_bytes(os, rec.values.data(), rec.values.size() * sizeof(T));
}

template <class T>
TensorRecord<T> get_record(std::istream& is) {
    TensorRecord<T> rec;
    const std::uint32_t name_len = get_u32(is);
    if (name_len == 0 || name_len > 4096) {
        throw IoError("checkpoint tensor name length " + std::to_string(name_len) +
                      " is implausible");
    }
    rec.name.resize(name_len);
    get_bytes(is, rec.name.data(), name_len);
    const std::uint8_t dtype = get_u8(is);
    if (dtype != dtype_tag<T>()) {
        throw IoError("checkpoint tensor \"" + rec.name + "\" stored as " +
                      (dtype == 0 ? "float32" : "float64") + ", expected " +
                      (dtype_tag<T>() == 0 ? "float32" : "float64"));
    }
    const std::uint32_t rank = get_u32(is);
    if (rank > 16) {
        throw IoError("checkpoint tensor \"" + rec.name + "\" has implausible rank " +
                      std::to_string(rank));
    }
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint64_t d = get_u64(is);
        if (d == 0 || d > (1ull << 32) || count > (1ull << 33)) {
            throw IoError("checkpoint tensor \"" + rec.name + "\" has implausible shape");
        }
        count *= d;
        rec.shape.push_back(static_cast<std::int64_t>(d));
    }
    rec.values.resize(count);
    get_bytes(is, rec.values.data(), count * sizeof(T));
    return rec;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    detail::put_bytes(os, detail::kCheckpointMagic, 4);
    detail::put_u32(os, detail::kCheckpointVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(ckpt.config_text.size()));
    detail::put_bytes(os, ckpt.config_text.data(), ckpt.config_text.size());
    detail::put_u64(os, ckpt.tensors.size());
    for (const auto& rec : ckpt.tensors) {
        detail::put_record(os, rec);
    }
    detail::put_u8(os, ckpt.has_optimizer ? 1 : 0);
    if (ckpt.has_optimizer) {
        detail::put_u64(os, ckpt.optimizer_step);
        detail::put_u64(os, ckpt.optimizer.size());
        for (const auto& rec : ckpt.optimizer) {
            detail::put_record(os, rec);
        }
    }
    os.flush();
    if (!os) {
        throw IoError("failed writing checkpoint to " + path.string());
    }
}

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    char magic[4] = {};
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, detail::kCheckpointMagic, 4) != 0) {
        throw IoError(path.string() + " is not a checkpoint");
    }
    const std::uint32_t version = detail::get_u32(is);
    if (version != detail::kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint<T> ckpt;
    const std::uint32_t cfg_len = detail::get_u32(is);
    if (cfg_len > (1u << 20)) {
        throw IoError("checkpoint config block is implausibly large");
    }
    ckpt.config_text.resize(cfg_len);
    if (cfg_len > 0) {
        detail::get_bytes(is, ckpt.config_text.data(), cfg_len);
    }
    const std::uint64_t count = detail::get_u64(is);
    if (count > (1ull << 20)) {
        throw IoError("checkpoint tensor count is implausible");
    }
    ckpt.tensors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ckpt.tensors.push_back(detail::get_record<T>(is));
    }
    ckpt.has_optimizer = detail::get_u8(is) != 0;
    if (ckpt.has_optimizer) {
        ckpt.optimizer_step = detail::get_u64(is);
        const std::uint64_t opt_count = detail::get_u64(is);
        if (opt_count > (1ull << 20)) {
            throw IoError("checkpoint optimizer tensor count is implausible");
        }
        ckpt.optimizer.reserve(opt_count);
        for (std::uint64_t i = 0; i < opt_count; ++i) {
            ckpt.optimizer.push_back(detail::get_record<T>(is));
        }
    }
    return ckpt;
}

/// Copies a model's parameters and running statistics into checkpoint
/// records, parameters first, in registry order.
template <class T>
Checkpoint<T> snapshot(Model<T>& model, std::string config_text) {
    Checkpoint<T> ckpt;
    ckpt.config_text = std::move(config_text);
    for (const auto& [name, p] : model.parameters()) {
        ckpt.tensors.push_back(
            TensorRecord<T>{name, p->shape(), {p->values().begin(), p->values().end()}});
    }
    for (const auto& [name, buf] : model.buffers()) {
        ckpt.tensors.push_back(TensorRecord<T>{
            name, Shape{static_cast<std::int64_t>(buf->size())}, *buf});
    }
    return ckpt;
}

/// Writes checkpoint tensors back into the model. Every model tensor must be
/// present with its exact shape; the first mismatch (in model order) is
/// reported by name.
template <class T>
void restore(Model<T>& model, const Checkpoint<T>& ckpt) {
    std::unordered_map<std::string, const TensorRecord<T>*> by_name;
    for (const auto& rec : ckpt.tensors) {
        if (!by_name.emplace(rec.name, &rec).second) {
            throw IoError("checkpoint holds tensor \"" + rec.name + "\" twice");
        }
    }
    std::size_t used = 0;
    for (const auto& [name, p] : model.parameters()) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw IoError("checkpoint is missing parameter \"" + name + "\"");
        }
        const TensorRecord<T>& rec = *it->second;
        if (rec.shape != p->shape()) {
            throw IoError("checkpoint parameter \"" + name + "\" has shape " +
                          shape_str(rec.shape) + ", model expects " + shape_str(p->shape()));
        }
        std::copy(rec.values.begin(), rec.values.end(), p->data());
        ++used;
    }
    for (const auto& [name, buf] : model.buffers()) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw IoError("checkpoint is missing buffer \"" + name + "\"");
        }
        const TensorRecord<T>& rec = *it->second;
        if (rec.values.size() != buf->size()) {
            throw IoError("checkpoint buffer \"" + name + "\" has " +
                          std::to_string(rec.values.size()) + " values, model expects " +
                          std::to_string(buf->size()));
        }
        *buf = rec.values;
        ++used;
    }
    if (used != by_name.size()) {
        for (const auto& rec : ckpt.tensors) {
            bool known = false;
            for (const auto& [name, p] : model.parameters()) {
                known = known || name == rec.name;
            }
            if (!known) {
                for (const auto& [name, buf] : model.buffers()) {
                    known = known || name == rec.name;
                }
            }
            if (!known) {
                throw IoError("checkpoint holds unknown tensor \"" + rec.name + "\"");
            }
        }
    }
}

}  // namespace cnet

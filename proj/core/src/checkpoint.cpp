#include "srp/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace srp {

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
    // little-endian host assumed (x86/arm64); bytes written as-is
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CheckpointError(path + ": truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr<float>>>& tensors,
                     std::uint64_t seed_state, const std::string& config_text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path);
    out.write("SRPC", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xFFFF) throw CheckpointError("tensor name too long: " + name);
        put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint8_t>(out, 0);  // dtype f32
        put<std::uint8_t>(out, static_cast<std::uint8_t>(t->rank()));
        for (int d : t->shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(float)));
    }
    put<std::uint64_t>(out, seed_state);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(config_text.size()));
    out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
    if (!out) throw CheckpointError("write failed for " + path);
}

CheckpointContent read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SRPC", 4) != 0)
        throw CheckpointError(path + ": bad magic, not a checkpoint file");
    const auto version = get<std::uint32_t>(in, path);
    if (version != 1)
        throw CheckpointError(path + ": unsupported checkpoint version " +
                              std::to_string(version));
    const auto count = get<std::uint32_t>(in, path);
    CheckpointContent content;
    content.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointContent::Entry e;
        const auto name_len = get<std::uint16_t>(in, path);
        e.name.resize(name_len);
        in.read(e.name.data(), name_len);
        const auto dtype = get<std::uint8_t>(in, path);
        if (dtype != 0)
            throw CheckpointError(path + ": unsupported dtype code " + std::to_string(dtype));
        const auto rank = get<std::uint8_t>(in, path);
        std::int64_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            e.shape.push_back(static_cast<int>(get<std::uint32_t>(in, path)));
            numel *= e.shape.back();
        }
        e.data.resize(static_cast<size_t>(numel));
        in.read(reinterpret_cast<char*>(e.data.data()),
                static_cast<std::streamsize>(numel * sizeof(float)));
        if (!in) throw CheckpointError(path + ": truncated tensor payload for " + e.name);
        content.tensors.push_back(std::move(e));
    }
    content.seed_state = get<std::uint64_t>(in, path);
    const auto text_len = get<std::uint32_t>(in, path);
    content.config_text.resize(text_len);
    in.read(content.config_text.data(), text_len);
    if (!in) throw CheckpointError(path + ": truncated config snapshot");
    return content;
}

void load_state(const CheckpointContent& content,
                const std::vector<std::pair<std::string, TensorPtr<float>>>& tensors) {
    for (const auto& [name, t] : tensors) {
        const auto* e = content.find(name);
        if (!e) throw CheckpointError("checkpoint is missing tensor " + name);
        if (e->shape != t->shape)
            throw CheckpointError("checkpoint tensor " + name + " has shape " +
                                  shape_str(e->shape) + ", expected " + shape_str(t->shape));
        t->data = e->data;
    }
}

}  // namespace srp

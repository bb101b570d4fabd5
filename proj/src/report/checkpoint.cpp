#include "shiftlab/report/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "shiftlab/core/error.hpp"
#include "shiftlab/data/blob.hpp"

namespace shiftlab {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw IoError("truncated checkpoint: " + path);
    return v;
}

std::int64_t read_i64(std::istream& in, const std::string& path) {
    std::int64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 8)) throw IoError("truncated checkpoint: " + path);
    return v;
}

std::string read_string(std::istream& in, const std::string& path) {
    const std::uint32_t n = read_u32(in, path);
    if (n > (1u << 20)) throw IoError("corrupt string length in checkpoint: " + path);
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n)))
        throw IoError("truncated checkpoint: " + path);
    return s;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path, bool include_optimizer) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint: " + path);
        out.write("SHBC", 4);
        write_u32(out, kCheckpointVersion);

        const ArchSpec& spec = model.spec();
        write_string(out, family_name(spec.family));
        write_u32(out, static_cast<std::uint32_t>(spec.canvas));
        write_u32(out, static_cast<std::uint32_t>(spec.in_channels));
        write_u32(out, static_cast<std::uint32_t>(spec.n_classes));
        write_u32(out, static_cast<std::uint32_t>(spec.width_mult));
        write_i64(out, static_cast<std::int64_t>(spec.seed));

        write_u32(out, static_cast<std::uint32_t>(model.params().size()));
        for (const Param& p : model.params()) {
            write_string(out, p.name);
            write_blob_stream(out, p.value);
        }

        Model& mut = const_cast<Model&>(model);  // bn_states() only exposes pointers
        const auto bn = mut.bn_states();
        write_u32(out, static_cast<std::uint32_t>(bn.size()));
        for (const auto& [name, state] : bn) {
            write_string(out, name);
            write_blob_stream(out, state->running_mean);
            write_blob_stream(out, state->running_var);
        }

        out.put(include_optimizer ? 1 : 0);
        if (include_optimizer)
            for (const Param& p : model.params()) {
                const bool has = p.adam.m.numel() > 0;
                out.put(has ? 1 : 0);
                if (has) {
                    write_blob_stream(out, p.adam.m);
                    write_blob_stream(out, p.adam.v);
                    write_i64(out, p.adam.step);
                }
            }
        if (!out) throw IoError("short write while emitting checkpoint: " + path);
    }
    fs::rename(tmp, target);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "SHBC")
        throw IoError("bad checkpoint magic in " + path + " (expected SHBC)");
    const std::uint32_t version = read_u32(in, path);
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + path);

    ArchSpec spec;
    spec.family = family_from_name(read_string(in, path));
    spec.canvas = static_cast<int>(read_u32(in, path));
    spec.in_channels = static_cast<int>(read_u32(in, path));
    spec.n_classes = static_cast<int>(read_u32(in, path));
    spec.width_mult = static_cast<int>(read_u32(in, path));
    spec.seed = static_cast<std::uint64_t>(read_i64(in, path));
    Model model(spec);

    const std::uint32_t n_params = read_u32(in, path);
    if (n_params != model.params().size())
        throw IoError("checkpoint lists " + std::to_string(n_params) + " parameters, model has " +
                      std::to_string(model.params().size()) + ": " + path);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::string name = read_string(in, path);
        Tensor<float> value = read_blob_stream(in, path);
        Param& p = model.params()[i];
        if (p.name != name)
            throw IoError("checkpoint parameter '" + name + "' does not match model parameter '" +
                          p.name + "': " + path);
        if (value.shape() != p.value.shape())
            throw IoError("shape mismatch for parameter '" + name + "' in " + path);
        p.value = std::move(value);
    }

    const std::uint32_t n_bn = read_u32(in, path);
    const auto bn = model.bn_states();
    if (n_bn != bn.size())
        throw IoError("checkpoint batch-norm state count mismatch in " + path);
    for (std::uint32_t i = 0; i < n_bn; ++i) {
        const std::string name = read_string(in, path);
        if (bn[i].first != name)
            throw IoError("checkpoint batch-norm state '" + name + "' does not match '" +
                          bn[i].first + "': " + path);
        Tensor<float> mean = read_blob_stream(in, path);
        Tensor<float> var = read_blob_stream(in, path);
        if (mean.shape() != bn[i].second->running_mean.shape() ||
            var.shape() != bn[i].second->running_var.shape())
            throw IoError("shape mismatch for batch-norm state '" + name + "' in " + path);
        bn[i].second->running_mean = std::move(mean);
        bn[i].second->running_var = std::move(var);
    }

    int has_optimizer = in.get();
    if (has_optimizer == std::istream::traits_type::eof())
        throw IoError("truncated checkpoint: " + path);
    if (has_optimizer)
        for (Param& p : model.params()) {
            const int has = in.get();
            if (has == std::istream::traits_type::eof())
                throw IoError("truncated checkpoint: " + path);
            if (has) {
                p.adam.m = read_blob_stream(in, path);
                p.adam.v = read_blob_stream(in, path);
                p.adam.step = static_cast<long>(read_i64(in, path));
            }
        }
    return model;
}

Model load_checkpoint(const std::string& path, const ArchSpec& expected) {
    Model model = load_checkpoint(path);
    const ArchSpec& got = model.spec();
    if (got.family != expected.family || got.canvas != expected.canvas ||
        got.in_channels != expected.in_channels || got.n_classes != expected.n_classes ||
        got.width_mult != expected.width_mult)
        throw IoError("checkpoint " + path + " holds a " + family_name(got.family) +
                      " model that does not match the requested architecture");
    return model;
}

}  // namespace shiftlab

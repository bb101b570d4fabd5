#include "shiftlab/data/blob.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "shiftlab/core/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "blob I/O assumes a little-endian host");

namespace shiftlab {

void write_blob_stream(std::ostream& out, const Tensor<float>& tensor) {
    out.write("SHB1", 4);
    const std::uint32_t ndims = static_cast<std::uint32_t>(tensor.rank());
    out.write(reinterpret_cast<const char*>(&ndims), 4);
    for (int d : tensor.shape()) {
        const std::uint32_t dim = static_cast<std::uint32_t>(d);
        out.write(reinterpret_cast<const char*>(&dim), 4);
    }
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
}

Tensor<float> read_blob_stream(std::istream& in, const std::string& context) {
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "SHB1")
        throw IoError("bad blob magic in " + context + " (expected SHB1)");
    std::uint32_t ndims = 0;
    if (!in.read(reinterpret_cast<char*>(&ndims), 4) || ndims > 8)
        throw IoError("corrupt blob header in " + context);
    Shape shape;
    for (std::uint32_t i = 0; i < ndims; ++i) {
        std::uint32_t d = 0;
        if (!in.read(reinterpret_cast<char*>(&d), 4))
            throw IoError("corrupt blob header in " + context);
        shape.push_back(static_cast<int>(d));
    }
    Tensor<float> out(shape);
    if (!in.read(reinterpret_cast<char*>(out.data()),
                 static_cast<std::streamsize>(out.numel() * sizeof(float))))
        throw IoError("truncated blob payload in " + context);
    return out;
}

void write_blob(const std::string& path, const Tensor<float>& tensor) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write blob: " + path);
        write_blob_stream(out, tensor);
        if (!out) throw IoError("short write while emitting blob: " + path);
    }
    fs::rename(tmp, target);
}

Tensor<float> read_blob(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open blob: " + path);
    return read_blob_stream(in, path);
}

}  // namespace shiftlab

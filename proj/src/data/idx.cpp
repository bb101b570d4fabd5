#include "shiftlab/data/idx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "shiftlab/core/error.hpp"

namespace shiftlab {

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IoError("truncated IDX file: " + path);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

GlyphDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open IDX image file: " + images_path);
    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != 2051)
        throw IoError("bad IDX image magic " + std::to_string(img_magic) + " in " + images_path +
                      " (expected 2051)");
    const std::uint32_t n = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
        throw IoError("implausible IDX image dimensions in " + images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open IDX label file: " + labels_path);
    const std::uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != 2049)
        throw IoError("bad IDX label magic " + std::to_string(lab_magic) + " in " + labels_path +
                      " (expected 2049)");
    const std::uint32_t n_lab = read_be32(lab, labels_path);
    if (n != n_lab)
        throw IoError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                      std::to_string(n_lab) + " labels");

    GlyphDataset out;
    out.id = std::filesystem::path(images_path).filename().string();
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> buf(pixels);
    int max_label = 0;
    out.samples.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
            throw IoError("truncated IDX image payload: " + images_path);
        char lbl = 0;
        if (!lab.read(&lbl, 1)) throw IoError("truncated IDX label payload: " + labels_path);
        GlyphSample s;
        s.class_id = static_cast<unsigned char>(lbl);
        s.pixels = Tensor<float>({static_cast<int>(rows), static_cast<int>(cols)});
        for (std::size_t p = 0; p < pixels; ++p)
            s.pixels[static_cast<Eigen::Index>(p)] = static_cast<float>(buf[p]) / 255.0f;
        max_label = std::max(max_label, s.class_id);
        out.samples.push_back(std::move(s));
    }
    out.n_classes = max_label + 1;
    return out;
}

void write_idx(const GlyphDataset& data, const std::string& images_path,
               const std::string& labels_path) {
    if (data.samples.empty()) throw ConfigError("write_idx: empty dataset");
    const int rows = data.samples.front().pixels.dim(0);
    const int cols = data.samples.front().pixels.dim(1);

    std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
    if (!img) throw IoError("cannot write IDX image file: " + images_path);
    write_be32(img, 2051);
    write_be32(img, static_cast<std::uint32_t>(data.samples.size()));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));

    std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
    if (!lab) throw IoError("cannot write IDX label file: " + labels_path);
    write_be32(lab, 2049);
    write_be32(lab, static_cast<std::uint32_t>(data.samples.size()));

    std::vector<unsigned char> buf;
    for (const auto& s : data.samples) {
        require_shape(s.pixels, {rows, cols}, "write_idx sample");
        buf.resize(static_cast<std::size_t>(s.pixels.numel()));
        for (Eigen::Index p = 0; p < s.pixels.numel(); ++p)
            buf[static_cast<std::size_t>(p)] = static_cast<unsigned char>(
                std::lround(std::clamp(s.pixels[p], 0.0f, 1.0f) * 255.0f));
        img.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
        const char lbl = static_cast<char>(s.class_id);
        lab.write(&lbl, 1);
    }
    if (!img || !lab) throw IoError("short write while emitting IDX files");
}

}  // namespace shiftlab

#include "shiftlab/report/heatmap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "shiftlab/core/error.hpp"

namespace shiftlab {

namespace {

/// Fractional grid index for a canvas coordinate: piecewise linear between
/// the probe centers, clamped to the end cells outside them.
double grid_coord(const std::vector<int>& centers, int G, int pixel) {
    if (pixel <= centers[0]) return 0;
    if (pixel >= centers[static_cast<std::size_t>(G - 1)]) return G - 1;
    for (int k = 0; k + 1 < G; ++k) {
        const int lo = centers[static_cast<std::size_t>(k)];
        const int hi = centers[static_cast<std::size_t>(k + 1)];
        if (pixel <= hi) return k + static_cast<double>(pixel - lo) / (hi - lo);
    }
    return G - 1;
}

std::vector<std::uint8_t> to_bytes(const Tensor<float>& image) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(static_cast<std::size_t>(image.numel()));
    for (std::int64_t i = 0; i < image.numel(); ++i) {
        const float v = std::clamp(image.data()[i], 0.0f, 1.0f);
        bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
    return bytes;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t crc = 0xFFFFFFFFu) {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc;
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    write_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    write_be32(out, crc32(out.data() + crc_start, out.size() - crc_start) ^ 0xFFFFFFFFu);
}

void write_file(const std::string& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write image: " + path);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw IoError("short write while emitting image: " + path);
}

}  // namespace

Tensor<float> heatmap_image(const DensityGrid& grid) {
    if (grid.G < 2 || grid.acc.size() != static_cast<std::size_t>(grid.G) * grid.G)
        throw ConfigError("density grid is not renderable");
    const int canvas = grid.geom.canvas;
    std::vector<int> col_centers(static_cast<std::size_t>(grid.G));
    std::vector<int> row_centers(static_cast<std::size_t>(grid.G));
    for (int i = 0; i < grid.G; ++i) {
        col_centers[static_cast<std::size_t>(i)] = grid.xs[static_cast<std::size_t>(i)];
        row_centers[static_cast<std::size_t>(i)] = grid.ys[static_cast<std::size_t>(i * grid.G)];
    }

    Tensor<float> image({canvas, canvas});
    for (int y = 0; y < canvas; ++y) {
        const double gy = grid_coord(row_centers, grid.G, y);
        const int y0 = std::min(static_cast<int>(gy), grid.G - 2);
        const double ty = gy - y0;
        for (int x = 0; x < canvas; ++x) {
            const double gx = grid_coord(col_centers, grid.G, x);
            const int x0 = std::min(static_cast<int>(gx), grid.G - 2);
            const double tx = gx - x0;
            const double v00 = grid.at(y0, x0);
            const double v01 = grid.at(y0, x0 + 1);
            const double v10 = grid.at(y0 + 1, x0);
            const double v11 = grid.at(y0 + 1, x0 + 1);
            const double top = v00 + (v01 - v00) * tx;
            const double bot = v10 + (v11 - v10) * tx;
            image.data()[static_cast<std::size_t>(y) * canvas + x] =
                static_cast<float>(top + (bot - top) * ty);
        }
    }
    return image;
}

void render_heatmap(const DensityGrid& grid, const std::string& pgm_path) {
    const Tensor<float> image = heatmap_image(grid);
    const std::vector<std::uint8_t> bytes = to_bytes(image);
    const std::string header = "P5\n" + std::to_string(grid.geom.canvas) + " " +
                               std::to_string(grid.geom.canvas) + "\n255\n";
    std::string out = header;
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    write_file(pgm_path, out.data(), out.size());
}

void render_heatmap_png(const DensityGrid& grid, const std::string& png_path) {
    const Tensor<float> image = heatmap_image(grid);
    const std::vector<std::uint8_t> bytes = to_bytes(image);
    const int size = grid.geom.canvas;

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

    std::vector<std::uint8_t> ihdr;
    write_be32(ihdr, static_cast<std::uint32_t>(size));
    write_be32(ihdr, static_cast<std::uint32_t>(size));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // default filtering
    ihdr.push_back(0);  // no interlace
    append_chunk(png, "IHDR", ihdr);

    // raw scanlines, each with filter byte 0
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(size) * (size + 1));
    for (int y = 0; y < size; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), bytes.begin() + static_cast<std::ptrdiff_t>(y) * size,
                   bytes.begin() + static_cast<std::ptrdiff_t>(y + 1) * size);
    }

    // zlib stream with stored (uncompressed) deflate blocks
    std::vector<std::uint8_t> idat = {0x78, 0x01};
    std::size_t pos = 0;
    while (pos < raw.size()) {
        const std::size_t len = std::min<std::size_t>(raw.size() - pos, 65535);
        const bool last = pos + len == raw.size();
        idat.push_back(last ? 1 : 0);
        idat.push_back(static_cast<std::uint8_t>(len & 0xFF));
        idat.push_back(static_cast<std::uint8_t>(len >> 8));
        idat.push_back(static_cast<std::uint8_t>(~len & 0xFF));
        idat.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xFF));
        idat.insert(idat.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos),
                    raw.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    std::uint32_t a = 1, b = 0;
    for (std::uint8_t byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    write_be32(idat, (b << 16) | a);
    append_chunk(png, "IDAT", idat);
    append_chunk(png, "IEND", {});

    write_file(png_path, png.data(), png.size());
}

}  // namespace shiftlab

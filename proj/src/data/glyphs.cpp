#include "shiftlab/data/glyphs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shiftlab/core/error.hpp"

namespace shiftlab {

std::vector<int> GlyphDataset::class_index(int class_id) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].class_id == class_id) out.push_back(static_cast<int>(i));
    return out;
}

void GlyphDataset::validate() const {
    for (const auto& s : samples) {
        if (s.class_id < 0 || s.class_id >= n_classes)
            throw ConfigError("dataset '" + id + "': class id " + std::to_string(s.class_id) +
                              " outside [0," + std::to_string(n_classes) + ")");
        require_rank(s.pixels, 2, "glyph pixels");
        require_finite(s.pixels, "glyph pixels");
    }
}

Tensor<float> bilinear_resize(const Tensor<float>& src, int out_h, int out_w) {
    require_rank(src, 2, "bilinear_resize input");
    if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: non-positive output size");
    const int H = src.dim(0), W = src.dim(1);
    Tensor<float> out({out_h, out_w});
    const double sy = static_cast<double>(H) / out_h;
    const double sx = static_cast<double>(W) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, H - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, W - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
            const double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
            out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

namespace {

constexpr int kGlyphSize = 28;

struct Poly {
    std::vector<double> xs, ys;
};

/// Random star-convex polygon around a center, radii jittered per vertex.
Poly random_polygon(Rng& rng, double cx, double cy, double r_lo, double r_hi) {
    const int nv = rng.uniform_int(3, 8);
    Poly p;
    double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    for (int i = 0; i < nv; ++i) {
        angle += 2.0 * 3.14159265358979323846 / nv * rng.uniform(0.6, 1.4);
        const double r = rng.uniform(r_lo, r_hi);
        p.xs.push_back(cx + r * std::cos(angle));
        p.ys.push_back(cy + r * std::sin(angle));
    }
    return p;
}

bool inside(const Poly& p, double x, double y) {
    bool in = false;
    const std::size_t n = p.xs.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((p.ys[i] > y) != (p.ys[j] > y) &&
            x < (p.xs[j] - p.xs[i]) * (y - p.ys[i]) / (p.ys[j] - p.ys[i]) + p.xs[i])
            in = !in;
    }
    return in;
}

/// Renders the glyph body with 2x2 supersampling for soft edges.
Tensor<float> render_base(Rng& rng) {
    const Poly body = random_polygon(rng, kGlyphSize / 2.0, kGlyphSize / 2.0, 7.0, 12.5);
    const bool has_hole = rng.uniform() < 0.5;
    const Poly hole = random_polygon(rng, kGlyphSize / 2.0 + rng.uniform(-3.0, 3.0),
                                     kGlyphSize / 2.0 + rng.uniform(-3.0, 3.0), 2.0, 4.5);
    const bool has_satellite = rng.uniform() < 0.4;
    const Poly satellite =
        random_polygon(rng, kGlyphSize / 2.0 + rng.uniform(-8.0, 8.0),
                       kGlyphSize / 2.0 + rng.uniform(-8.0, 8.0), 1.5, 3.5);

    Tensor<float> img({kGlyphSize, kGlyphSize});
    for (int y = 0; y < kGlyphSize; ++y)
        for (int x = 0; x < kGlyphSize; ++x) {
            int cover = 0;
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx) {
                    const double px = x + 0.25 + 0.5 * sx;
                    const double py = y + 0.25 + 0.5 * sy;
                    bool on = inside(body, px, py);
                    if (on && has_hole && inside(hole, px, py)) on = false;
                    if (!on && has_satellite && inside(satellite, px, py)) on = true;
                    cover += on ? 1 : 0;
                }
            img.at(y, x) = static_cast<float>(cover) / 4.0f;
        }
    return img;
}

/// Rotation+scale about the glyph center via inverse-mapped bilinear lookup.
Tensor<float> rotate_scale(const Tensor<float>& src, double angle_rad, double scale) {
    const int H = src.dim(0), W = src.dim(1);
    const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
    const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
    Tensor<float> out({H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double dx = (x - cx) / scale, dy = (y - cy) / scale;
            const double sxf = ca * dx + sa * dy + cx;
            const double syf = -sa * dx + ca * dy + cy;
            if (sxf < 0 || syf < 0 || sxf > W - 1 || syf > H - 1) continue;
            const int x0 = static_cast<int>(sxf), y0 = static_cast<int>(syf);
            const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
            const double wx = sxf - x0, wy = syf - y0;
            const double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
            const double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
            out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    return out;
}

}  // namespace

GlyphDataset synth_glyphs(int n_classes, int samples_per_class, double intra_class_jitter,
                          std::uint64_t seed) {
    if (n_classes < 2) throw ConfigError("synth_glyphs: need at least 2 classes");
    if (samples_per_class < 1) throw ConfigError("synth_glyphs: need at least 1 sample per class");
    if (intra_class_jitter < 0.0 || intra_class_jitter > 1.0)
        throw ConfigError("synth_glyphs: jitter must lie in [0,1]");

    GlyphDataset out;
    out.id = "synth-c" + std::to_string(n_classes) + "-j" + std::to_string(intra_class_jitter) +
             "-s" + std::to_string(seed);
    out.n_classes = n_classes;
    out.samples.reserve(static_cast<std::size_t>(n_classes) * samples_per_class);

    for (int c = 0; c < n_classes; ++c) {
        Rng base_rng(derive_seed(seed, static_cast<std::uint64_t>(c), 0));
        const Tensor<float> base = render_base(base_rng);
        for (int i = 0; i < samples_per_class; ++i) {
            if (intra_class_jitter == 0.0) {
                out.samples.push_back({c, base});
                continue;
            }
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c),
                                1000003ULL + static_cast<std::uint64_t>(i)));
            const double angle =
                intra_class_jitter * rng.uniform(-15.0, 15.0) * 3.14159265358979323846 / 180.0;
            const double scale = 1.0 + intra_class_jitter * rng.uniform(-0.1, 0.1);
            Tensor<float> img = rotate_scale(base, angle, scale);
            const double noise_amp = 0.08 * intra_class_jitter;
            for (Eigen::Index p = 0; p < img.numel(); ++p) {
                const double v = img[p] + noise_amp * rng.normal();
                img[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
            out.samples.push_back({c, std::move(img)});
        }
    }
    return out;
}

GlyphDataset take_classes(const GlyphDataset& source, int n_classes) {
    if (n_classes < 2 || n_classes > source.n_classes)
        throw ConfigError("cannot take " + std::to_string(n_classes) + " classes from a " +
                          std::to_string(source.n_classes) + "-class dataset");
    GlyphDataset out;
    out.id = source.id + "-first" + std::to_string(n_classes);
    out.n_classes = n_classes;
    for (const GlyphSample& s : source.samples)
        if (s.class_id < n_classes) out.samples.push_back(s);
    return out;
}

}  // namespace shiftlab

#include "shiftlab/data/store.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "shiftlab/data/blob.hpp"

namespace shiftlab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json read_manifest(const std::string& dir, const std::string& want_kind) {
    const fs::path p = fs::path(dir) / "manifest.json";
    std::ifstream in(p);
    if (!in) throw IoError("cannot open dataset manifest: " + p.string());
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw IoError("malformed dataset manifest " + p.string() + ": " + e.what());
    }
    if (m.value("kind", "") != want_kind)
        throw IoError("dataset " + dir + " has kind '" + m.value("kind", "") + "', expected '" +
                      want_kind + "'");
    return m;
}

void write_manifest(const std::string& dir, const json& m) {
    const fs::path p = fs::path(dir) / "manifest.json";
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw IoError("cannot write dataset manifest: " + p.string());
    out << m.dump(2) << "\n";
}

Tensor<float> labels_to_blob(const std::vector<int>& labels) {
    Tensor<float> t({static_cast<int>(labels.size())});
    for (std::size_t i = 0; i < labels.size(); ++i)
        t[static_cast<Eigen::Index>(i)] = static_cast<float>(labels[i]);
    return t;
}

std::vector<int> blob_to_labels(const Tensor<float>& t) {
    std::vector<int> out(static_cast<std::size_t>(t.numel()));
    for (Eigen::Index i = 0; i < t.numel(); ++i)
        out[static_cast<std::size_t>(i)] = static_cast<int>(t[i]);
    return out;
}

}  // namespace

void save_glyphs(const std::string& dir, const GlyphDataset& data, double jitter,
                 std::uint64_t seed) {
    if (data.samples.empty()) throw ConfigError("save_glyphs: empty dataset");
    fs::create_directories(dir);
    const int h = data.samples.front().pixels.dim(0);
    const int w = data.samples.front().pixels.dim(1);
    Tensor<float> pixels({static_cast<int>(data.samples.size()), h, w});
    std::vector<int> labels;
    const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        require_shape(data.samples[i].pixels, {h, w}, "save_glyphs sample");
        std::copy_n(data.samples[i].pixels.data(), plane,
                    pixels.data() + static_cast<Eigen::Index>(i) * plane);
        labels.push_back(data.samples[i].class_id);
    }
    write_blob((fs::path(dir) / "images.shb1").string(), pixels);
    write_blob((fs::path(dir) / "labels.shb1").string(), labels_to_blob(labels));
    write_manifest(dir, json{{"kind", "glyphs"},
                             {"name", data.id},
                             {"classes", data.n_classes},
                             {"samples", data.samples.size()},
                             {"jitter", jitter},
                             {"seed", seed}});
}

GlyphDataset load_glyphs(const std::string& dir) {
    const json m = read_manifest(dir, "glyphs");
    const Tensor<float> pixels = read_blob((fs::path(dir) / "images.shb1").string());
    const std::vector<int> labels =
        blob_to_labels(read_blob((fs::path(dir) / "labels.shb1").string()));
    require_rank(pixels, 3, "glyph image blob");
    if (pixels.dim(0) != static_cast<int>(labels.size()))
        throw IoError("dataset " + dir + ": image/label count mismatch");
    GlyphDataset out;
    out.id = m.value("name", fs::path(dir).filename().string());
    out.n_classes = m.at("classes").get<int>();
    const int h = pixels.dim(1), w = pixels.dim(2);
    const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        GlyphSample s;
        s.class_id = labels[i];
        s.pixels = Tensor<float>({h, w});
        std::copy_n(pixels.data() + static_cast<Eigen::Index>(i) * plane, plane, s.pixels.data());
        out.samples.push_back(std::move(s));
    }
    out.validate();
    return out;
}

void save_placed(const std::string& dir, const PlacedDataset& data) {
    fs::create_directories(dir);
    write_blob((fs::path(dir) / "images.shb1").string(), data.images);
    write_blob((fs::path(dir) / "labels.shb1").string(), labels_to_blob(data.labels));
    write_manifest(dir, json{{"kind", "placed"},
                             {"source", data.source_id},
                             {"policy", data.policy_desc},
                             {"seed", data.seed},
                             {"classes", data.n_classes},
                             {"geometry", {{"canvas", data.geom.canvas}, {"item", data.geom.item}}}});
}

PlacedDataset load_placed(const std::string& dir) {
    const json m = read_manifest(dir, "placed");
    PlacedDataset out;
    out.images = read_blob((fs::path(dir) / "images.shb1").string());
    out.labels = blob_to_labels(read_blob((fs::path(dir) / "labels.shb1").string()));
    require_rank(out.images, 4, "placed image blob");
    if (out.images.dim(0) != static_cast<int>(out.labels.size()))
        throw IoError("dataset " + dir + ": image/label count mismatch");
    out.source_id = m.value("source", "");
    out.policy_desc = m.value("policy", "");
    out.seed = m.value("seed", 0ULL);
    out.n_classes = m.at("classes").get<int>();
    out.geom.canvas = m.at("geometry").at("canvas").get<int>();
    out.geom.item = m.at("geometry").at("item").get<int>();
    return out;
}

}  // namespace shiftlab

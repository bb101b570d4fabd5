#include "shiftlab/data/placement.hpp"

#include <algorithm>
#include <sstream>

namespace shiftlab {

std::string placement_mode_name(PlacementMode mode) {
    switch (mode) {
        case PlacementMode::fixed: return "fixed";
        case PlacementMode::uniform_full: return "uniform_full";
        case PlacementMode::region: return "region";
        case PlacementMode::grid9: return "grid9";
        case PlacementMode::quadrant: return "quadrant";
    }
    return "?";
}

PlacementPolicy PlacementPolicy::one_location(Geometry g) {
    return make_fixed(g, g.base_theta());
}

PlacementPolicy PlacementPolicy::make_fixed(Geometry g, PositionTheta theta) {
    if (!g.admissible(theta))
        throw ConfigError("fixed placement at (" + std::to_string(theta.cx) + "," +
                          std::to_string(theta.cy) + ") leaves the canvas");
    PlacementPolicy p;
    p.mode = PlacementMode::fixed;
    p.geom = g;
    p.fixed_theta = theta;
    return p;
}

PlacementPolicy PlacementPolicy::fully_translated(Geometry g) {
    PlacementPolicy p;
    p.mode = PlacementMode::uniform_full;
    p.geom = g;
    return p;
}

PlacementPolicy PlacementPolicy::make_region(Geometry g, std::map<int, RegionRect> regions) {
    PlacementPolicy p;
    p.mode = PlacementMode::region;
    p.geom = g;
    p.regions = std::move(regions);
    for (const auto& [cls, rect] : p.regions) {
        const int lo = g.min_center(), hi = g.max_center();
        if (rect.x0 > rect.x1 || rect.y0 > rect.y1 || rect.x1 < lo || rect.x0 > hi ||
            rect.y1 < lo || rect.y0 > hi)
            throw ConfigError("region for class " + std::to_string(cls) +
                              " admits no canvas-visible center");
    }
    return p;
}

PlacementPolicy PlacementPolicy::make_grid9(Geometry g) {
    PlacementPolicy p;
    p.mode = PlacementMode::grid9;
    p.geom = g;
    return p;
}

PlacementPolicy PlacementPolicy::make_quadrant(Geometry g, int condition, int n_classes,
                                               int translated_count) {
    if (condition < 1 || condition > 3)
        throw ConfigError("quadrant condition must be 1, 2 or 3");
    PlacementPolicy p;
    p.mode = PlacementMode::quadrant;
    p.geom = g;
    p.quadrant_condition = condition;
    if (condition == 2) {
        // the last 7 classes live in the quadrant, mirroring letters T..Z of a
        // 26-class alphabet
        if (n_classes < 8)
            throw ConfigError("quadrant condition 2 needs at least 8 classes");
        for (int c = n_classes - 7; c < n_classes; ++c) p.restricted_classes.push_back(c);
    }
    if (condition == 3) {
        if (translated_count < 1 || translated_count >= n_classes)
            throw ConfigError("quadrant condition 3 needs 1 <= translated_count < n_classes");
        p.translated_count = translated_count;
    }
    // the quadrant must be able to hold a full footprint
    if (g.canvas / 2 < g.item)
        throw ConfigError("quadrant smaller than the item footprint");
    return p;
}

RegionRect PlacementPolicy::grid9_area(int area) const {
    const int third = geom.canvas / 3;
    const int col = area % 3, row = area / 3;
    return {col * third, row * third, (col + 1) * third - 1, (row + 1) * third - 1};
}

int PlacementPolicy::grid9_area_of(int class_id) const { return class_id / 2; }

RegionRect PlacementPolicy::quadrant_rect() const {
    return {geom.canvas / 2, 0, geom.canvas - 1, geom.canvas / 2 - 1};
}

bool PlacementPolicy::class_in_quadrant(int class_id) const {
    if (mode != PlacementMode::quadrant) return false;
    if (quadrant_condition == 2)
        return std::find(restricted_classes.begin(), restricted_classes.end(), class_id) !=
               restricted_classes.end();
    if (quadrant_condition == 3) return class_id >= translated_count;
    return false;
}

std::string PlacementPolicy::describe() const {
    std::ostringstream os;
    os << placement_mode_name(mode);
    if (mode == PlacementMode::fixed) os << "(" << fixed_theta.cx << "," << fixed_theta.cy << ")";
    if (mode == PlacementMode::quadrant) {
        os << "-c" << quadrant_condition;
        if (quadrant_condition == 3) os << "-t" << translated_count;
    }
    return os.str();
}

namespace {

PositionTheta uniform_in(const RegionRect& r, Geometry g, Rng& rng) {
    const int lox = std::max(r.x0, g.min_center());
    const int hix = std::min(r.x1, g.max_center());
    const int loy = std::max(r.y0, g.min_center());
    const int hiy = std::min(r.y1, g.max_center());
    if (lox > hix || loy > hiy) throw ConfigError("placement region admits no visible center");
    return {rng.uniform_int(lox, hix), rng.uniform_int(loy, hiy)};
}

/// Inclusive footprint rectangle of an item centered at theta.
RegionRect footprint(PositionTheta t, Geometry g) {
    const int half = g.item / 2;
    return {t.cx - half, t.cy - half, t.cx - half + g.item - 1, t.cy - half + g.item - 1};
}

bool rects_overlap(const RegionRect& a, const RegionRect& b) {
    return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

/// Center whose footprint stays fully inside the rect.
PositionTheta uniform_footprint_inside(const RegionRect& r, Geometry g, Rng& rng) {
    const int half = g.item / 2;
    const int lox = r.x0 + half, hix = r.x1 - (g.item - 1 - half);
    const int loy = r.y0 + half, hiy = r.y1 - (g.item - 1 - half);
    if (lox > hix || loy > hiy) throw ConfigError("region cannot fit the item footprint");
    return {rng.uniform_int(lox, hix), rng.uniform_int(loy, hiy)};
}

PositionTheta uniform_excluding(const RegionRect& excluded, Geometry g, Rng& rng) {
    for (int tries = 0; tries < 100000; ++tries) {
        PositionTheta t{rng.uniform_int(g.min_center(), g.max_center()),
                        rng.uniform_int(g.min_center(), g.max_center())};
        if (!rects_overlap(footprint(t, g), excluded)) return t;
    }
    throw ConfigError("rejection sampling failed to avoid the excluded region");
}

}  // namespace

PositionTheta sample_position(const PlacementPolicy& policy, int class_id, Rng& rng) {
    const Geometry g = policy.geom;
    switch (policy.mode) {
        case PlacementMode::fixed:
            return policy.fixed_theta;
        case PlacementMode::uniform_full:
            return {rng.uniform_int(g.min_center(), g.max_center()),
                    rng.uniform_int(g.min_center(), g.max_center())};
        case PlacementMode::region: {
            auto it = policy.regions.find(class_id);
            if (it == policy.regions.end())
                throw ConfigError("class " + std::to_string(class_id) +
                                  " has no region under this policy");
            return uniform_in(it->second, g, rng);
        }
        case PlacementMode::grid9: {
            if (class_id < 0 || class_id >= 2 * policy.grid9_pairs)
                throw ConfigError("class " + std::to_string(class_id) +
                                  " has no grid9 area (policy covers classes 0.." +
                                  std::to_string(2 * policy.grid9_pairs - 1) + ")");
            return uniform_in(policy.grid9_area(policy.grid9_area_of(class_id)), g, rng);
        }
        case PlacementMode::quadrant: {
            const RegionRect quad = policy.quadrant_rect();
            if (policy.class_in_quadrant(class_id))
                return uniform_footprint_inside(quad, g, rng);
            if (policy.quadrant_condition == 3)  // translated classes roam everywhere
                return {rng.uniform_int(g.min_center(), g.max_center()),
                        rng.uniform_int(g.min_center(), g.max_center())};
            return uniform_excluding(quad, g, rng);
        }
    }
    throw ConfigError("unhandled placement mode");
}

RegionRect upper_right_quadrant(const Geometry& geom) {
    return {geom.canvas / 2, 0, geom.canvas - 1, geom.canvas / 2 - 1};
}

PositionTheta sample_inside_rect(const RegionRect& rect, const Geometry& geom, Rng& rng) {
    return uniform_footprint_inside(rect, geom, rng);
}

PositionTheta sample_avoiding_rect(const RegionRect& rect, const Geometry& geom, Rng& rng) {
    return uniform_excluding(rect, geom, rng);
}

Tensor<float> place(const GlyphSample& item, int canvas_size, int item_size, PositionTheta theta) {
    require_rank(item.pixels, 2, "place item");
    const int half = item_size / 2;
    const int left = theta.cx - half;
    const int top = theta.cy - half;
    if (left < 0 || top < 0 || left + item_size > canvas_size || top + item_size > canvas_size)
        throw ConfigError("item footprint at (" + std::to_string(theta.cx) + "," +
                          std::to_string(theta.cy) + ") leaves the " +
                          std::to_string(canvas_size) + "px canvas");
    Tensor<float> canvas({canvas_size, canvas_size});
    const Tensor<float> resized =
        (item.pixels.dim(0) == item_size && item.pixels.dim(1) == item_size)
            ? item.pixels
            : bilinear_resize(item.pixels, item_size, item_size);
    for (int y = 0; y < item_size; ++y)
        for (int x = 0; x < item_size; ++x) canvas.at(top + y, left + x) = resized.at(y, x);
    return canvas;
}

}  // namespace shiftlab

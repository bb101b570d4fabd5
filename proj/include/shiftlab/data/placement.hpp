#pragma once

#include <map>
#include <string>
#include <vector>

#include "shiftlab/core/rng.hpp"
#include "shiftlab/data/geometry.hpp"
#include "shiftlab/data/glyphs.hpp"

namespace shiftlab {

/// Inclusive pixel rectangle in canvas coordinates.
struct RegionRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool contains(PositionTheta t) const {
        return t.cx >= x0 && t.cx <= x1 && t.cy >= y0 && t.cy <= y1;
    }
    bool operator==(const RegionRect&) const = default;
};

enum class PlacementMode { fixed, uniform_full, region, grid9, quadrant };

std::string placement_mode_name(PlacementMode mode);

/// Rule mapping (class, rng) to an item-center position.
///
/// grid9 splits the canvas into thirds per axis (area a = 3*row + col) and
/// assigns classes pairwise: classes 2a and 2a+1 belong to area a. Centers are
/// drawn inside the class's area, additionally clamped to the canvas-admissible
/// band, so footprints may slightly overlap neighbouring areas.
///
/// quadrant conditions use the upper-right quadrant:
///   condition 1: quadrant kept empty; every class translates over the rest
///     (footprints never touch the quadrant).
///   condition 2: `restricted_classes` live fully inside the quadrant; all
///     other classes translate over the rest, excluding the quadrant.
///   condition 3: classes below `translated_count` translate over the whole
///     canvas; the rest live fully inside the quadrant.
struct PlacementPolicy {
    PlacementMode mode = PlacementMode::fixed;
    Geometry geom;
    PositionTheta fixed_theta;
    std::map<int, RegionRect> regions;     // region mode
    int grid9_pairs = 9;                   // grid9: classes 0..17 in areas 0..8
    int quadrant_condition = 0;            // 1 | 2 | 3
    std::vector<int> restricted_classes;   // condition 2
    int translated_count = 0;              // condition 3

    static PlacementPolicy one_location(Geometry g);
    static PlacementPolicy make_fixed(Geometry g, PositionTheta theta);
    static PlacementPolicy fully_translated(Geometry g);
    static PlacementPolicy make_region(Geometry g, std::map<int, RegionRect> regions);
    static PlacementPolicy make_grid9(Geometry g);
    static PlacementPolicy make_quadrant(Geometry g, int condition, int n_classes,
                                         int translated_count = 0);

    /// Area rectangle for grid9 (area 0..8, row-major from top-left).
    RegionRect grid9_area(int area) const;
    /// Area index a class is assigned to under grid9.
    int grid9_area_of(int class_id) const;
    /// The upper-right quadrant rectangle.
    RegionRect quadrant_rect() const;
    /// True if the class may only appear inside the quadrant.
    bool class_in_quadrant(int class_id) const;

    std::string describe() const;
};

/// Draws a center for one item of `class_id` under the policy.
PositionTheta sample_position(const PlacementPolicy& policy, int class_id, Rng& rng);

/// The upper-right quadrant of a canvas.
RegionRect upper_right_quadrant(const Geometry& geom);
/// Uniform center whose item footprint lies fully inside the rect.
PositionTheta sample_inside_rect(const RegionRect& rect, const Geometry& geom, Rng& rng);
/// Uniform admissible center whose item footprint does not touch the rect.
PositionTheta sample_avoiding_rect(const RegionRect& rect, const Geometry& geom, Rng& rng);

/// Resizes the item to item_size x item_size (bilinear) and pastes it centered
/// at theta on a black canvas. Throws if the footprint leaves the canvas.
Tensor<float> place(const GlyphSample& item, int canvas_size, int item_size, PositionTheta theta);

}  // namespace shiftlab

#pragma once

#include <string>

#include "shiftlab/core/error.hpp"

namespace shiftlab {

/// Item-center coordinates in canvas pixels, x to the right, y down.
struct PositionTheta {
    int cx = 0;
    int cy = 0;

    bool operator==(const PositionTheta&) const = default;
};

/// Square canvas plus square item size. The item footprint is pasted with its
/// top-left corner at center - item/2, so a center must stay within
/// [item/2, canvas - item + item/2] per axis to keep the item fully visible.
struct Geometry {
    int canvas = 96;
    int item = 22;

    static Geometry desk() { return {96, 22}; }
    static Geometry paper_scale() { return {224, 50}; }

    /// Leftmost-centered base position: x hugs the left edge, y is centered.
    PositionTheta base_theta() const { return {item / 2, canvas / 2}; }

    int min_center() const { return item / 2; }
    int max_center() const { return canvas - item + item / 2; }

    bool admissible(PositionTheta t) const {
        return t.cx >= min_center() && t.cx <= max_center() && t.cy >= min_center() &&
               t.cy <= max_center();
    }

    bool operator==(const Geometry&) const = default;
};

inline Geometry geometry_from_name(const std::string& name) {
    if (name == "desk") return Geometry::desk();
    if (name == "paper") return Geometry::paper_scale();
    throw ConfigError("unknown geometry '" + name + "' (expected desk or paper)");
}

}  // namespace shiftlab

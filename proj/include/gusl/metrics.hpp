#pragma once

#include <array>
#include <vector>

#include "gusl/volume.hpp"

namespace gusl {

// Boundary voxels of a mask: foreground with at least one of its 6 neighbors
// background, or touching the volume edge. Coordinates are physical (mm).
struct BoundarySet {
    std::vector<std::array<double, 3>> points;
};

// Dice similarity 2|X n Y| / (|X| + |Y|); dsc(empty, empty) = 1.
double dsc(const BinaryMask& x, const BinaryMask& y);

BoundarySet boundary(const BinaryMask& x, const std::array<double, 3>& spacing);
BoundarySet boundary(const BinaryMask& x);  // uses the mask's own spacing

// Average symmetric boundary distance in mm. Throws on empty masks.
double abd(const BinaryMask& x, const BinaryMask& y, const std::array<double, 3>& spacing);

// 95th percentile (linear interpolation, inclusive) of the pooled directed
// boundary distances. Throws on empty masks.
double hd95(const BinaryMask& x, const BinaryMask& y, const std::array<double, 3>& spacing);

}  // namespace gusl

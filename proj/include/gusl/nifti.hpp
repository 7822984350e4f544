#pragma once

#include <string>

#include "gusl/volume.hpp"

namespace gusl {

// Minimal NIfTI-1 reader for uncompressed single-file .nii, little-endian,
// datatypes uint8 / int16 / float32. dim[0] must be 3, or 4 with dim[4] == 1.
// scl_slope/scl_inter are applied when scl_slope != 0. Spacing comes from
// pixdim[1..3]; file axis x maps to shape axis H, y to W, z to D.
Volume3D load_nifti(const std::string& path);

// Writes a float32 single-file NIfTI-1 volume readable by load_nifti.
void save_nifti(const Volume3D& vol, const std::string& path);

}  // namespace gusl

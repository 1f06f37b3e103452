#pragma once

#include <string>

#include "pdac/core/types.hpp"

namespace pdac::io {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Single-file NIfTI-1 (.nii or .nii.gz). Values are returned as float after
// applying scl_slope/scl_inter; spacing and origin come from pixdim/qoffset.
// Only 3-D images are accepted.

/// Raw intensities in (z, y, x) order; no windowing or normalization.
Volume read_nifti_volume(const std::string& path);

/// Integer labels; values must fit the mask's class range {0, 1, 2}.
LabelMask read_nifti_mask(const std::string& path);

void write_nifti_volume(const std::string& path, const Volume& v);
void write_nifti_mask(const std::string& path, const LabelMask& m,
                      const std::array<double, 3>& spacing);

}  // namespace pdac::io

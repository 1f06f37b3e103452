#pragma once

#include <set>

#include "pdac/core/types.hpp"

namespace pdac {

/// One binary 3-D channel per class; channel c is 1 exactly where mask == c.
/// Throws InvalidLabelError if any voxel value >= n_classes.
std::vector<Volume> one_hot_mask(const LabelMask& mask, int n_classes);

/// Per-voxel argmax over channels (inverse of one_hot_mask).
LabelMask argmax_channels(const std::vector<Volume>& channels);

/// Tightest box around all voxels whose class is in foreground_classes,
/// dilated by margin per axis and clipped to the mask shape.
/// Throws EmptyForegroundError if no foreground voxel exists.
BBox3 bbox_from_mask(const LabelMask& mask,
                     const std::set<int>& foreground_classes, Index3 margin);

Volume crop(const Volume& volume, const BBox3& bbox);
LabelMask crop(const LabelMask& mask, const BBox3& bbox);

/// Crop y/x to out_size around the center (ties toward lower index);
/// z extent unchanged. Returns the cropped volume.
Volume center_crop(const Volume& volume, std::int64_t out_y, std::int64_t out_x);
BBox3 center_crop_bbox(Index3 shape, std::int64_t out_y, std::int64_t out_x);

}  // namespace pdac

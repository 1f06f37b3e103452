#include "pdac/core/geometry.hpp"

#include <algorithm>
#include <limits>

namespace pdac {

std::vector<Volume> one_hot_mask(const LabelMask& mask, int n_classes) {
  for (std::uint8_t v : mask.data) {
    if (v >= n_classes)
      throw InvalidLabelError("one_hot_mask: voxel value " +
                              std::to_string(int(v)) + " >= n_classes " +
                              std::to_string(n_classes));
  }
  std::vector<Volume> channels;
  channels.reserve(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) channels.emplace_back(mask.shape, 0.0f);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    channels[mask.data[i]].data[i] = 1.0f;
  return channels;
}

LabelMask argmax_channels(const std::vector<Volume>& channels) {
  if (channels.empty()) throw ShapeError("argmax_channels: no channels");
  LabelMask out(channels[0].shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    int best = 0;
    float best_v = channels[0].data[i];
    for (std::size_t c = 1; c < channels.size(); ++c) {
      if (channels[c].data[i] > best_v) {
        best_v = channels[c].data[i];
        best = static_cast<int>(c);
      }
    }
    out.data[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

BBox3 bbox_from_mask(const LabelMask& mask,
                     const std::set<int>& foreground_classes, Index3 margin) {
  Index3 lo{std::numeric_limits<std::int64_t>::max(),
            std::numeric_limits<std::int64_t>::max(),
            std::numeric_limits<std::int64_t>::max()};
  Index3 hi{-1, -1, -1};
  for (std::int64_t z = 0; z < mask.shape[0]; ++z)
    for (std::int64_t y = 0; y < mask.shape[1]; ++y)
      for (std::int64_t x = 0; x < mask.shape[2]; ++x)
        if (foreground_classes.count(mask.at(z, y, x))) {
          lo = {std::min(lo[0], z), std::min(lo[1], y), std::min(lo[2], x)};
          hi = {std::max(hi[0], z), std::max(hi[1], y), std::max(hi[2], x)};
        }
  if (hi[0] < 0)
    throw EmptyForegroundError("bbox_from_mask: no foreground voxels");
  BBox3 box;
  for (int a = 0; a < 3; ++a) {
    box.lo[a] = std::max<std::int64_t>(0, lo[a] - margin[a]);
    box.hi[a] = std::min(mask.shape[a] - 1, hi[a] + margin[a]);
  }
  return box;
}

namespace {

void check_bbox(const BBox3& bbox, const Index3& shape) {
  for (int a = 0; a < 3; ++a) {
    if (bbox.lo[a] < 0 || bbox.hi[a] >= shape[a] || bbox.lo[a] > bbox.hi[a])
      throw IndexError("crop: bbox out of range on axis " + std::to_string(a));
  }
}

template <typename Grid>
void copy_box(const Grid& src, Grid& dst, const BBox3& bbox) {
  const Index3 e = bbox.extents();
  for (std::int64_t z = 0; z < e[0]; ++z)
    for (std::int64_t y = 0; y < e[1]; ++y)
      for (std::int64_t x = 0; x < e[2]; ++x)
        dst.at(z, y, x) =
            src.at(bbox.lo[0] + z, bbox.lo[1] + y, bbox.lo[2] + x);
}

}  // namespace

Volume crop(const Volume& volume, const BBox3& bbox) {
  check_bbox(bbox, volume.shape);
  Volume out(bbox.extents());
  out.spacing = volume.spacing;
  for (int a = 0; a < 3; ++a)
    out.origin[a] = volume.origin[a] + double(bbox.lo[a]) * volume.spacing[a];
  copy_box(volume, out, bbox);
  return out;
}

LabelMask crop(const LabelMask& mask, const BBox3& bbox) {
  check_bbox(bbox, mask.shape);
  LabelMask out(bbox.extents());
  copy_box(mask, out, bbox);
  return out;
}

BBox3 center_crop_bbox(Index3 shape, std::int64_t out_y, std::int64_t out_x) {
  if (out_y > shape[1] || out_x > shape[2] || out_y < 1 || out_x < 1)
    throw SizeError("center_crop: requested size exceeds volume extents");
  const std::int64_t y0 = (shape[1] - out_y) / 2;  // ties toward lower index
  const std::int64_t x0 = (shape[2] - out_x) / 2;
  return BBox3{{0, y0, x0}, {shape[0] - 1, y0 + out_y - 1, x0 + out_x - 1}};
}

Volume center_crop(const Volume& volume, std::int64_t out_y,
                   std::int64_t out_x) {
  return crop(volume, center_crop_bbox(volume.shape, out_y, out_x));
}

}  // namespace pdac

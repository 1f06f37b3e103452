#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdac {

// Every 3-D index in this codebase is ordered (z, y, x).
using Index3 = std::array<std::int64_t, 3>;

struct InvalidLabelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyForegroundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense 3-D scalar grid of CT intensities with physical metadata.
struct Volume {
  Index3 shape{0, 0, 0};                    // (z, y, x) extents
  std::array<double, 3> spacing{1, 1, 1};   // mm per voxel, (z, y, x)
  std::array<double, 3> origin{0, 0, 0};    // mm offset, (z, y, x)
  std::vector<float> data;                  // row-major, x fastest

  Volume() = default;
  Volume(Index3 s, float fill = 0.0f)
      : shape(s), data(static_cast<std::size_t>(s[0] * s[1] * s[2]), fill) {
    if (s[0] < 1 || s[1] < 1 || s[2] < 1)
      throw SizeError("Volume: all dimensions must be >= 1");
  }

  std::int64_t numel() const { return shape[0] * shape[1] * shape[2]; }

  float& at(std::int64_t z, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>((z * shape[1] + y) * shape[2] + x)];
  }
  float at(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>((z * shape[1] + y) * shape[2] + x)];
  }
};

/// 3-D integer class grid over {background=0, pancreas=1, tumour=2}.
struct LabelMask {
  Index3 shape{0, 0, 0};
  std::vector<std::uint8_t> data;
  static constexpr int kNumClasses = 3;

  LabelMask() = default;
  explicit LabelMask(Index3 s, std::uint8_t fill = 0)
      : shape(s), data(static_cast<std::size_t>(s[0] * s[1] * s[2]), fill) {
    if (s[0] < 1 || s[1] < 1 || s[2] < 1)
      throw SizeError("LabelMask: all dimensions must be >= 1");
  }

  std::int64_t numel() const { return shape[0] * shape[1] * shape[2]; }

  std::uint8_t& at(std::int64_t z, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>((z * shape[1] + y) * shape[2] + x)];
  }
  std::uint8_t at(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>((z * shape[1] + y) * shape[2] + x)];
  }
};

/// Axis-aligned index box, inclusive on both ends, (z, y, x) order.
struct BBox3 {
  Index3 lo{0, 0, 0};
  Index3 hi{0, 0, 0};

  Index3 extents() const {
    return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
  }
  bool contains(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return z >= lo[0] && z <= hi[0] && y >= lo[1] && y <= hi[1] && x >= lo[2] &&
           x <= hi[2];
  }
};

enum class Split { Train, Test };

/// One study: a volume plus whatever labels it carries.
struct CaseRecord {
  std::string case_id;
  std::string volume_path;
  std::optional<std::string> mask_path;
  std::optional<int> response_label;  // 1 = progressive disease, 0 = other
  Split split = Split::Train;
};

}  // namespace pdac

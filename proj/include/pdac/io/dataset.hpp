#pragma once

#include <map>
#include <utility>

#include "pdac/core/types.hpp"
#include "pdac/io/nifti.hpp"

namespace pdac::io {

struct StratificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetManifest {
  std::string name;
  std::vector<CaseRecord> cases;

  /// Counts over cases carrying a response_label.
  std::map<int, int> class_counts() const;
  void check_unique_ids() const;
};

struct PreprocessSpec {
  // Abdominal soft-tissue window in HU.
  double hu_low = -150.0;
  double hu_high = 250.0;
  // Optional isotropic-or-not resampling target; absent = keep native grid.
  std::optional<std::array<double, 3>> target_spacing;
};

/// Read an MSD task root: dataset.json naming image/label pairs plus the
/// imagesTr/labelsTr directories. Every listed file must exist.
DatasetManifest load_msd(const std::string& root);

/// Read, clamp to the HU window, min-max scale to [0,1], optionally resample
/// (trilinear).
Volume load_volume(const std::string& path, const PreprocessSpec& spec);

/// Labels bypass intensity transforms; resampling is nearest-neighbour.
LabelMask load_mask(const std::string& path, const PreprocessSpec& spec);

/// Deterministic per-class split: test count per class is
/// round(class_count * test_fraction), with the largest class absorbing the
/// rounding remainder against round(total * test_fraction).
std::pair<DatasetManifest, DatasetManifest> stratified_split(
    const DatasetManifest& manifest, double test_fraction, std::uint64_t seed);

// Classification manifest: UTF-8 tab-separated with header
// case_id<TAB>volume_path<TAB>response_label. Relative paths resolve against
// the manifest's directory.
DatasetManifest load_classification_manifest(const std::string& path);
void write_classification_manifest(const std::string& path,
                                   const DatasetManifest& manifest);

// Grid resampling.
Volume resample_volume(const Volume& v, Index3 out_shape);
LabelMask resample_mask_nearest(const LabelMask& m, Index3 out_shape);
Index3 shape_for_spacing(const Volume& v, const std::array<double, 3>& target);

}  // namespace pdac::io

#pragma once

#include "pdac/io/dataset.hpp"

namespace pdac::phantom {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Geometry and labelling knobs for one synthetic abdominal phantom.
/// The response label is a deterministic function of the generated mask:
/// label = 1 iff tumour_voxels / pancreas_region_voxels >= threshold, where
/// the pancreas region is the union of classes {1, 2}.
struct PhantomParams {
  Index3 shape{64, 96, 96};
  std::array<double, 2> pancreas_radius_range{14.0, 18.0};
  std::array<double, 2> tumour_radius_range{4.0, 10.0};
  double noise_sigma = 0.02;
  double label_rule_threshold = 0.08;

  void validate() const;
};

struct PhantomCase {
  Volume volume;
  LabelMask mask;
  int response_label = 0;
};

/// Deterministic per (params, seed). Throws GenerationError when the drawn
/// tumour cannot fit inside the drawn pancreas.
PhantomCase generate_case(const PhantomParams& params, std::uint64_t seed);

/// The label rule, recomputable from any stored mask.
double tumour_ratio(const LabelMask& mask);

/// Materialize n cases under out_root in the MSD layout (dataset.json,
/// imagesTr/, labelsTr/) plus a classification manifest manifest.tsv.
/// Case i uses seed + i; tumour radii alternate between the lower and upper
/// half of the configured range so both labels occur.
io::DatasetManifest generate_dataset(const PhantomParams& params, int n,
                                     std::uint64_t seed,
                                     const std::string& out_root);

}  // namespace pdac::phantom

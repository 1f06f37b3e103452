#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pdac/core/types.hpp"
#include "pdac/stage1/slice.hpp"
#include "pdac/stage2/seg.hpp"
#include "pdac/stage3/cls.hpp"

namespace pdac::pipeline {

struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OrchestrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Table rows, in cumulative order: each row enables every feature of the
/// rows before it.
enum class AblationRow {
  Baseline = 0,
  SliceCrop,
  InformedCrop,
  SegForward,
  Transfer,
  Triplet,
};

const std::vector<AblationRow>& all_rows();
std::string row_name(AblationRow row);
AblationRow row_from_name(const std::string& name);

struct ExperimentConfig {
  // data
  std::string data_root;   // directory with manifest.tsv (+ MSD layout)
  std::string out_dir;
  double test_fraction = 0.25;
  std::uint64_t split_seed = 42;
  double hu_low = 0.0;    // intensity window; phantoms are already stored in
  double hu_high = 1.0;   // [0,1], so (0,1) is the identity for them
  bool cache_stages = true;

  // protocol
  std::vector<AblationRow> rows = all_rows();
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  // geometry
  Index3 baseline_resolution{48, 48, 48};
  std::array<std::int64_t, 2> center_crop_size{64, 64};
  std::int64_t z_margin = 2;
  Index3 informed_margin{8, 8, 8};
  std::set<int> crop_foreground = {1, 2};

  // stage hyperparameters
  stage1::SliceTrainConfig slice_train;
  stage1::SliceModelConfig slice_model;
  stage2::SegTrainConfig seg_train;
  stage3::ClsTrainConfig cls_train;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::string& path);

/// Stable hex digest of the config slice that affects a given stage; used as
/// the cache key for stage checkpoints and per-run predictions.
std::string stage_cache_key(const ExperimentConfig& c, const std::string& stage);

}  // namespace pdac::pipeline

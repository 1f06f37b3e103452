#pragma once

#include <map>
#include <memory>

#include "pdac/metrics/metrics.hpp"
#include "pdac/pipeline/config.hpp"

namespace pdac::pipeline {

struct CasePrediction {
  std::string case_id;
  double score = 0.0;  // response probability
  int label = 0;
  int predicted = 0;   // score >= 0.5
};

struct RunResult {
  AblationRow row = AblationRow::Baseline;
  std::uint64_t seed = 0;
  double mcc = 0.0, accuracy = 0.0, auc_roc = 0.0;
  std::vector<CasePrediction> predictions;
};

struct RowSummary {
  AblationRow row = AblationRow::Baseline;
  metrics::RunSummary mcc, accuracy, auc_roc;
};

struct AblationReport {
  std::vector<RunResult> runs;
  std::vector<RowSummary> summaries;
  std::string table_csv_path;
  std::string results_json_path;
  std::string boxplot_path;
};

/// Recompute the three metrics from persisted per-case predictions.
void compute_metrics(RunResult& run);

/// Runs the cascade protocol: trains stage 1/2 once per config (cached on
/// disk under out_dir/cache when enabled), then one classifier per
/// (row, seed), evaluating each on the held-out split.
class Orchestrator {
 public:
  explicit Orchestrator(ExperimentConfig cfg);

  stage1::SliceModel& slice_model();
  stage2::UNet3d& seg_model();

  /// Row-specific preprocessing of one volume into a classifier input.
  nn::Tensor row_input(AblationRow row, const Volume& volume,
                       const std::string& cache_id = "",
                       bool* used_fallback = nullptr);

  RunResult run_row_seed(AblationRow row, std::uint64_t seed);
  /// Where the trained classifier for (row, seed) is cached on disk.
  std::string cls_checkpoint_path(AblationRow row, std::uint64_t seed) const;
  AblationReport run();

  const io::DatasetManifest& train_split() const { return train_; }
  const io::DatasetManifest& test_split() const { return test_; }
  const ExperimentConfig& config() const { return cfg_; }

  Volume load_case_volume(const CaseRecord& rec) const;

 private:
  std::vector<stage1::TrainingCase>& mask_train_cases();
  nn::Tensor cls_input_for_case(AblationRow row, const CaseRecord& rec);

  ExperimentConfig cfg_;
  io::DatasetManifest train_, test_;
  std::unique_ptr<stage1::SliceModel> slice_;
  std::unique_ptr<stage2::UNet3d> seg_;
  std::vector<stage1::TrainingCase> mask_cases_;
  bool mask_cases_loaded_ = false;

  // per-case caches shared across rows and seeds
  std::map<std::string, std::pair<Volume, BBox3>> zcrop_cache_;
  std::map<std::string, LabelMask> seg_pred_cache_;
};

}  // namespace pdac::pipeline

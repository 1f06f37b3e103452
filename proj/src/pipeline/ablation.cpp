#include "pdac/pipeline/ablation.hpp"

#include <filesystem>
#include <fstream>

#include "pdac/pipeline/report.hpp"

namespace fs = std::filesystem;

namespace pdac::pipeline {

namespace {

nn::Tensor volume_to_tensor(const Volume& v) {
  nn::Tensor t({1, v.shape[0], v.shape[1], v.shape[2]});
  t.v = v.data;
  return t;
}

bool all_zero(const stage1::SliceLabelSequence& seq) {
  for (auto s : seq.values)
    if (s) return false;
  return true;
}

void write_predictions_json(const std::string& path, const RunResult& run,
                            const std::string& cache_key) {
  nlohmann::json j;
  j["row"] = row_name(run.row);
  j["seed"] = run.seed;
  j["cache_key"] = cache_key;
  j["cases"] = nlohmann::json::array();
  for (const auto& p : run.predictions)
    j["cases"].push_back({{"case_id", p.case_id},
                          {"score", p.score},
                          {"label", p.label},
                          {"predicted", p.predicted}});
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  if (!f) throw OrchestrationError("cannot write " + path);
}

bool read_predictions_json(const std::string& path, const std::string& cache_key,
                           RunResult& run) {
  std::ifstream f(path);
  if (!f) return false;
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded() || j.value("cache_key", "") != cache_key) return false;
  run.predictions.clear();
  for (const auto& c : j.at("cases")) {
    CasePrediction p;
    p.case_id = c.at("case_id").get<std::string>();
    p.score = c.at("score").get<double>();
    p.label = c.at("label").get<int>();
    p.predicted = c.at("predicted").get<int>();
    run.predictions.push_back(std::move(p));
  }
  return true;
}

}  // namespace

void compute_metrics(RunResult& run) {
  if (run.predictions.empty())
    throw OrchestrationError("no predictions for " + row_name(run.row));
  std::vector<int> preds, labels;
  std::vector<double> scores;
  for (const auto& p : run.predictions) {
    preds.push_back(p.predicted);
    labels.push_back(p.label);
    scores.push_back(p.score);
  }
  auto counts = metrics::ConfusionCounts::from_pairs(preds, labels);
  run.mcc = metrics::mcc(counts);
  run.accuracy = metrics::accuracy(counts);
  try {
    run.auc_roc = metrics::auc_roc(scores, labels);
  } catch (const metrics::UndefinedMetricError&) {
    run.auc_roc = 0.5;  // single-class evaluation split
  }
}

Orchestrator::Orchestrator(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto manifest = io::load_classification_manifest(
      (fs::path(cfg_.data_root) / "manifest.tsv").string());
  manifest.check_unique_ids();
  std::tie(train_, test_) =
      io::stratified_split(manifest, cfg_.test_fraction, cfg_.split_seed);
  if (train_.cases.empty() || test_.cases.empty())
    throw OrchestrationError("split produced an empty train or test set");
  fs::create_directories(fs::path(cfg_.out_dir) / "cache");
}

Volume Orchestrator::load_case_volume(const CaseRecord& rec) const {
  io::PreprocessSpec spec;
  spec.hu_low = cfg_.hu_low;
  spec.hu_high = cfg_.hu_high;
  return io::load_volume(rec.volume_path, spec);
}

std::vector<stage1::TrainingCase>& Orchestrator::mask_train_cases() {
  if (mask_cases_loaded_) return mask_cases_;
  io::PreprocessSpec spec;
  spec.hu_low = cfg_.hu_low;
  spec.hu_high = cfg_.hu_high;
  for (const auto& rec : train_.cases) {
    if (!rec.mask_path) continue;
    stage1::TrainingCase tc;
    tc.volume = io::load_volume(rec.volume_path, spec);
    tc.mask = io::load_mask(*rec.mask_path, spec);
    mask_cases_.push_back(std::move(tc));
  }
  if (mask_cases_.empty())
    throw OrchestrationError(
        "cascade rows need masks, but no training case has one");
  mask_cases_loaded_ = true;
  return mask_cases_;
}

stage1::SliceModel& Orchestrator::slice_model() {
  if (slice_) return *slice_;
  slice_ = std::make_unique<stage1::SliceModel>(cfg_.slice_model,
                                                cfg_.slice_train.seed);
  const auto key = stage_cache_key(cfg_, "stage1");
  const auto path =
      (fs::path(cfg_.out_dir) / "cache" / ("stage1_" + key + ".ck")).string();
  if (cfg_.cache_stages && fs::exists(path)) {
    slice_->from_checkpoint(nn::Checkpoint::load(path));
    return *slice_;
  }
  auto& cases = mask_train_cases();
  train_slice_classifier(*slice_, cases, cases, cfg_.slice_train);
  if (cfg_.cache_stages)
    slice_->to_checkpoint(static_cast<std::int64_t>(cfg_.slice_train.seed))
        .save(path);
  return *slice_;
}

stage2::UNet3d& Orchestrator::seg_model() {
  if (seg_) return *seg_;
  seg_ = std::make_unique<stage2::UNet3d>(cfg_.seg_train.seed);
  const auto key = stage_cache_key(cfg_, "stage2");
  const auto path =
      (fs::path(cfg_.out_dir) / "cache" / ("stage2_" + key + ".ck")).string();
  if (cfg_.cache_stages && fs::exists(path)) {
    seg_->from_checkpoint(nn::Checkpoint::load(path));
    return *seg_;
  }
  // train on ground-truth z-cropped cases: that is the regime the network
  // sees at inference time, after stage 1 has trimmed the scan
  std::vector<stage1::TrainingCase> cropped;
  for (const auto& tc : mask_train_cases()) {
    auto seq = stage1::derive_slice_labels(tc.mask);
    auto [vol, bbox] = stage1::z_crop(tc.volume, seq, cfg_.z_margin);
    stage1::TrainingCase c;
    c.volume = std::move(vol);
    c.mask = crop(tc.mask, bbox);
    cropped.push_back(std::move(c));
  }
  train_segmentation(*seg_, cropped, cropped, cfg_.seg_train);
  if (cfg_.cache_stages)
    seg_->to_checkpoint(static_cast<std::int64_t>(cfg_.seg_train.seed))
        .save(path);
  return *seg_;
}

nn::Tensor Orchestrator::row_input(AblationRow row, const Volume& volume,
                                   const std::string& cache_id,
                                   bool* used_fallback) {
  if (used_fallback) *used_fallback = false;
  if (row == AblationRow::Baseline)
    return volume_to_tensor(io::resample_volume(volume, cfg_.baseline_resolution));

  // stage 1: z-range restriction
  Volume zc;
  if (!cache_id.empty() && zcrop_cache_.count(cache_id)) {
    zc = zcrop_cache_.at(cache_id).first;
  } else {
    auto seq = stage1::fill_gaps(slice_model().predict(volume));
    BBox3 bbox{{0, 0, 0},
               {volume.shape[0] - 1, volume.shape[1] - 1, volume.shape[2] - 1}};
    if (all_zero(seq)) {
      zc = volume;  // keep the whole stack when nothing is flagged
      if (used_fallback) *used_fallback = true;
    } else {
      std::tie(zc, bbox) = stage1::z_crop(volume, seq, cfg_.z_margin);
    }
    if (!cache_id.empty()) zcrop_cache_.emplace(cache_id, std::make_pair(zc, bbox));
  }

  if (row == AblationRow::SliceCrop) {
    const auto oy = std::min(cfg_.center_crop_size[0], zc.shape[1]);
    const auto ox = std::min(cfg_.center_crop_size[1], zc.shape[2]);
    return volume_to_tensor(center_crop(zc, oy, ox));
  }

  // stage 2: informed crop from the predicted mask
  LabelMask pred;
  if (!cache_id.empty() && seg_pred_cache_.count(cache_id)) {
    pred = seg_pred_cache_.at(cache_id);
  } else {
    pred = seg_model().predict(zc).mask;
    if (!cache_id.empty()) seg_pred_cache_.emplace(cache_id, pred);
  }
  auto ic = stage2::informed_crop(zc, pred, cfg_.informed_margin,
                                  cfg_.center_crop_size, cfg_.crop_foreground);
  if (used_fallback && ic.used_fallback) *used_fallback = true;

  if (row == AblationRow::InformedCrop) return volume_to_tensor(ic.volume);
  return stage2::forward_channels(ic.volume, ic.mask);
}

std::string Orchestrator::cls_checkpoint_path(AblationRow row,
                                              std::uint64_t seed) const {
  const auto key = stage_cache_key(cfg_, "stage3");
  return (fs::path(cfg_.out_dir) / "cache" /
          ("cls_" + row_name(row) + "_" + std::to_string(seed) + "_" + key +
           ".ck"))
      .string();
}

nn::Tensor Orchestrator::cls_input_for_case(AblationRow row,
                                            const CaseRecord& rec) {
  return row_input(row, load_case_volume(rec), rec.case_id);
}

RunResult Orchestrator::run_row_seed(AblationRow row, std::uint64_t seed) {
  RunResult run;
  run.row = row;
  run.seed = seed;

  const auto key = stage_cache_key(cfg_, "stage3");
  const auto pred_path = (fs::path(cfg_.out_dir) / "predictions" /
                          (row_name(row) + "_" + std::to_string(seed) + ".json"))
                             .string();
  if (cfg_.cache_stages && read_predictions_json(pred_path, key, run)) {
    compute_metrics(run);
    return run;
  }

  // make upstream stages available before touching per-case inputs
  if (row != AblationRow::Baseline) slice_model();
  if (row != AblationRow::Baseline && row != AblationRow::SliceCrop) seg_model();

  std::vector<nn::Tensor> inputs;
  std::vector<int> labels;
  for (const auto& rec : train_.cases) {
    if (!rec.response_label)
      throw OrchestrationError("training case " + rec.case_id +
                               " has no response label");
    inputs.push_back(cls_input_for_case(row, rec));
    labels.push_back(*rec.response_label);
  }

  stage3::ClassifierSpec spec;
  spec.in_channels = static_cast<int>(inputs.front().shape[0]);
  spec.backbone = (row == AblationRow::Transfer || row == AblationRow::Triplet)
                      ? stage3::Backbone::Transferred
                      : stage3::Backbone::Standalone;

  stage3::Classifier model(spec, seed);
  if (spec.backbone == stage3::Backbone::Transferred)
    stage3::transfer_encoder(
        seg_model().to_checkpoint(static_cast<std::int64_t>(cfg_.seg_train.seed)),
        model);

  auto train_cfg = cfg_.cls_train;
  train_cfg.seed = seed;
  if (row != AblationRow::Triplet) train_cfg.triplet.epochs_stage_a = 0;
  train_two_stage(model, inputs, labels, train_cfg);
  if (cfg_.cache_stages)
    model.to_checkpoint(static_cast<std::int64_t>(seed))
        .save(cls_checkpoint_path(row, seed));

  for (const auto& rec : test_.cases) {
    if (!rec.response_label)
      throw OrchestrationError("test case " + rec.case_id +
                               " has no response label");
    CasePrediction p;
    p.case_id = rec.case_id;
    p.score = model.predict_response(cls_input_for_case(row, rec));
    p.label = *rec.response_label;
    p.predicted = p.score >= 0.5 ? 1 : 0;
    run.predictions.push_back(std::move(p));
  }

  compute_metrics(run);
  write_predictions_json(pred_path, run, key);
  return run;
}

AblationReport Orchestrator::run() {
  AblationReport report;
  for (AblationRow row : cfg_.rows)
    for (std::uint64_t seed : cfg_.seeds)
      report.runs.push_back(run_row_seed(row, seed));

  for (AblationRow row : cfg_.rows) {
    RowSummary s;
    s.row = row;
    std::vector<double> mccs, accs, aucs;
    for (const auto& r : report.runs)
      if (r.row == row) {
        mccs.push_back(r.mcc);
        accs.push_back(r.accuracy);
        aucs.push_back(r.auc_roc);
      }
    auto summarize = [](const std::vector<double>& v) {
      if (v.size() >= 2) return metrics::summarize_runs(v);
      metrics::RunSummary one;
      one.values = v;
      one.mean = v.empty() ? 0.0 : v.front();
      one.stddev = 0.0;
      return one;
    };
    s.mcc = summarize(mccs);
    s.accuracy = summarize(accs);
    s.auc_roc = summarize(aucs);
    report.summaries.push_back(std::move(s));
  }

  report.table_csv_path = (fs::path(cfg_.out_dir) / "results.csv").string();
  report.results_json_path = (fs::path(cfg_.out_dir) / "results.json").string();
  report.boxplot_path = (fs::path(cfg_.out_dir) / "boxplot_mcc.svg").string();
  write_results_csv(report.table_csv_path, report.runs);
  write_results_json(report.results_json_path, report.runs, report.summaries);
  write_mcc_boxplot(report.boxplot_path, report.summaries);
  return report;
}

}  // namespace pdac::pipeline

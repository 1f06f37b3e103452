#include "pdac/pipeline/config.hpp"

#include <fstream>

namespace pdac::pipeline {

const std::vector<AblationRow>& all_rows() {
  static const std::vector<AblationRow> rows = {
      AblationRow::Baseline,     AblationRow::SliceCrop,
      AblationRow::InformedCrop, AblationRow::SegForward,
      AblationRow::Transfer,     AblationRow::Triplet};
  return rows;
}

std::string row_name(AblationRow row) {
  switch (row) {
    case AblationRow::Baseline: return "baseline";
    case AblationRow::SliceCrop: return "slice_crop";
    case AblationRow::InformedCrop: return "informed_crop";
    case AblationRow::SegForward: return "seg_forward";
    case AblationRow::Transfer: return "transfer";
    case AblationRow::Triplet: return "triplet";
  }
  throw ConfigurationError("unknown ablation row");
}

AblationRow row_from_name(const std::string& name) {
  for (AblationRow r : all_rows())
    if (row_name(r) == name) return r;
  throw ConfigurationError("unknown ablation row '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (data_root.empty()) throw ConfigurationError("config: data_root not set");
  if (out_dir.empty()) throw ConfigurationError("config: out_dir not set");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigurationError("config: test_fraction must be in (0,1)");
  if (seeds.empty()) throw ConfigurationError("config: no seeds configured");
  if (rows.empty()) throw ConfigurationError("config: no rows configured");
  if (hu_low >= hu_high)
    throw ConfigurationError("config: hu_low must be < hu_high");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  std::vector<std::string> row_names;
  for (AblationRow r : c.rows) row_names.push_back(row_name(r));
  j = nlohmann::json{
      {"data_root", c.data_root},
      {"out_dir", c.out_dir},
      {"test_fraction", c.test_fraction},
      {"split_seed", c.split_seed},
      {"hu_low", c.hu_low},
      {"hu_high", c.hu_high},
      {"cache_stages", c.cache_stages},
      {"rows", row_names},
      {"seeds", c.seeds},
      {"baseline_resolution", c.baseline_resolution},
      {"center_crop_size", c.center_crop_size},
      {"z_margin", c.z_margin},
      {"informed_margin", c.informed_margin},
      {"crop_foreground", std::vector<int>(c.crop_foreground.begin(),
                                           c.crop_foreground.end())},
      {"slice_train",
       {{"epochs", c.slice_train.epochs},
        {"lr", c.slice_train.lr},
        {"seed", c.slice_train.seed}}},
      {"slice_model",
       {{"hidden", c.slice_model.hidden},
        {"threshold", c.slice_model.threshold},
        {"bidirectional", c.slice_model.bidirectional}}},
      {"seg_train",
       {{"epochs", c.seg_train.epochs},
        {"patches_per_case", c.seg_train.patches_per_case},
        {"patch_shape", c.seg_train.patch_shape},
        {"fg_patch_prob", c.seg_train.fg_patch_prob},
        {"dice_weight", c.seg_train.dice_weight},
        {"lr", c.seg_train.lr},
        {"seed", c.seg_train.seed}}},
      {"cls_train",
       {{"lr", c.cls_train.lr},
        {"batch", c.cls_train.batch},
        {"class_weighting", c.cls_train.class_weighting},
        {"margin", c.cls_train.triplet.margin},
        {"epochs_stage_a", c.cls_train.triplet.epochs_stage_a},
        {"epochs_stage_b", c.cls_train.triplet.epochs_stage_b},
        {"triplets_per_step", c.cls_train.triplet.triplets_per_step}}}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.data_root = j.value("data_root", c.data_root);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.split_seed = j.value("split_seed", c.split_seed);
  c.hu_low = j.value("hu_low", c.hu_low);
  c.hu_high = j.value("hu_high", c.hu_high);
  c.cache_stages = j.value("cache_stages", c.cache_stages);
  if (j.contains("rows")) {
    c.rows.clear();
    for (const auto& n : j.at("rows")) c.rows.push_back(row_from_name(n));
  }
  if (j.contains("seeds"))
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("baseline_resolution"))
    c.baseline_resolution = j.at("baseline_resolution").get<Index3>();
  if (j.contains("center_crop_size"))
    c.center_crop_size =
        j.at("center_crop_size").get<std::array<std::int64_t, 2>>();
  c.z_margin = j.value("z_margin", c.z_margin);
  if (j.contains("informed_margin"))
    c.informed_margin = j.at("informed_margin").get<Index3>();
  if (j.contains("crop_foreground")) {
    c.crop_foreground.clear();
    for (int v : j.at("crop_foreground")) c.crop_foreground.insert(v);
  }
  if (j.contains("slice_train")) {
    const auto& s = j.at("slice_train");
    c.slice_train.epochs = s.value("epochs", c.slice_train.epochs);
    c.slice_train.lr = s.value("lr", c.slice_train.lr);
    c.slice_train.seed = s.value("seed", c.slice_train.seed);
  }
  if (j.contains("slice_model")) {
    const auto& s = j.at("slice_model");
    c.slice_model.hidden = s.value("hidden", c.slice_model.hidden);
    c.slice_model.threshold = s.value("threshold", c.slice_model.threshold);
    c.slice_model.bidirectional =
        s.value("bidirectional", c.slice_model.bidirectional);
  }
  if (j.contains("seg_train")) {
    const auto& s = j.at("seg_train");
    c.seg_train.epochs = s.value("epochs", c.seg_train.epochs);
    c.seg_train.patches_per_case =
        s.value("patches_per_case", c.seg_train.patches_per_case);
    if (s.contains("patch_shape"))
      c.seg_train.patch_shape = s.at("patch_shape").get<Index3>();
    c.seg_train.fg_patch_prob = s.value("fg_patch_prob", c.seg_train.fg_patch_prob);
    c.seg_train.dice_weight = s.value("dice_weight", c.seg_train.dice_weight);
    c.seg_train.lr = s.value("lr", c.seg_train.lr);
    c.seg_train.seed = s.value("seed", c.seg_train.seed);
  }
  if (j.contains("cls_train")) {
    const auto& s = j.at("cls_train");
    c.cls_train.lr = s.value("lr", c.cls_train.lr);
    c.cls_train.batch = s.value("batch", c.cls_train.batch);
    c.cls_train.class_weighting =
        s.value("class_weighting", c.cls_train.class_weighting);
    c.cls_train.triplet.margin = s.value("margin", c.cls_train.triplet.margin);
    c.cls_train.triplet.epochs_stage_a =
        s.value("epochs_stage_a", c.cls_train.triplet.epochs_stage_a);
    c.cls_train.triplet.epochs_stage_b =
        s.value("epochs_stage_b", c.cls_train.triplet.epochs_stage_b);
    c.cls_train.triplet.triplets_per_step =
        s.value("triplets_per_step", c.cls_train.triplet.triplets_per_step);
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigurationError("config: cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded())
    throw ConfigurationError("config: unparsable JSON in " + path);
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

namespace {

// FNV-1a over the serialized slice; stable across runs and platforms
std::string hex_digest(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string stage_cache_key(const ExperimentConfig& c,
                            const std::string& stage) {
  nlohmann::json full = c;
  nlohmann::json slice;
  // the upstream config slice grows with the stage: later stages depend on
  // everything the earlier ones consumed
  slice["data"] = {full["data_root"], full["test_fraction"], full["split_seed"],
                   full["hu_low"], full["hu_high"]};
  if (stage == "stage1" || stage == "stage2" || stage == "stage3") {
    slice["stage1"] = {full["slice_train"], full["slice_model"]};
  }
  if (stage == "stage2" || stage == "stage3") {
    slice["stage2"] = {full["seg_train"], full["z_margin"]};
  }
  if (stage == "stage3") {
    slice["stage3"] = {full["cls_train"], full["baseline_resolution"],
                       full["center_crop_size"], full["informed_margin"],
                       full["crop_foreground"]};
  }
  return hex_digest(stage + ":" + slice.dump());
}

}  // namespace pdac::pipeline

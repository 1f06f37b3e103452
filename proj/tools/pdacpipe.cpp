// pdacpipe: command-line front end for the response-prediction cascade.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pdac/phantom/phantom.hpp"
#include "pdac/pipeline/ablation.hpp"
#include "pdac/pipeline/report.hpp"
#include "pdac/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace pdac;

namespace {

pipeline::ExperimentConfig load_cfg(const std::string& path) {
  auto cfg = pipeline::load_config(path);
  return cfg;
}

void apply_seed_override(pipeline::ExperimentConfig& cfg,
                         const std::vector<std::uint64_t>& seeds) {
  if (!seeds.empty()) cfg.seeds = seeds;
}

void print_run(const pipeline::RunResult& r) {
  std::printf("%-14s seed=%-4llu mcc=%+.4f acc=%.4f auc=%.4f\n",
              pipeline::row_name(r.row).c_str(),
              static_cast<unsigned long long>(r.seed), r.mcc, r.accuracy,
              r.auc_roc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-stage cascade for tumour response prediction from CT"};
  app.require_subcommand(1);

  std::string backend = "auto";
  app.add_option("--backend", backend,
                 "compute kernels: auto, scalar, avx2, neon");

  std::string config_path, out_path, in_path, mask_out, manifest_path;
  std::string row_str = "triplet";
  std::vector<std::uint64_t> seeds;
  int count = 20;
  std::uint64_t gen_seed = 7;
  std::vector<std::int64_t> shape = {64, 96, 96};
  double test_fraction = 0.25;
  std::uint64_t split_seed = 42;

  auto* prep = app.add_subcommand("prepare-phantoms",
                                  "generate a synthetic phantom dataset");
  prep->add_option("--out", out_path, "output dataset root")->required();
  prep->add_option("--count", count, "number of cases");
  prep->add_option("--seed", gen_seed, "generation seed");
  prep->add_option("--shape", shape, "volume shape z y x")->expected(3);

  auto* prepmsd = app.add_subcommand("prepare-msd",
                                     "validate an MSD task directory");
  prepmsd->add_option("--root", in_path, "MSD task root")->required();

  auto* split = app.add_subcommand("split", "stratified train/test split");
  split->add_option("--manifest", manifest_path, "classification manifest")
      ->required();
  split->add_option("--test-fraction", test_fraction, "test fraction");
  split->add_option("--seed", split_seed, "split seed");
  split->add_option("--out", out_path, "directory for train/test manifests")
      ->required();

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON")
        ->required();
  };

  auto* tslice = app.add_subcommand("train-slice", "train the slice model");
  add_config(tslice);
  auto* tseg = app.add_subcommand("train-seg", "train the segmentation model");
  add_config(tseg);

  auto* cropz = app.add_subcommand("crop-z", "slice-model z-crop of a volume");
  add_config(cropz);
  cropz->add_option("--volume", in_path, "input volume")->required();
  cropz->add_option("--out", out_path, "cropped output volume")->required();

  auto* pseg = app.add_subcommand("predict-seg", "predict a segmentation mask");
  add_config(pseg);
  pseg->add_option("--volume", in_path, "input volume")->required();
  pseg->add_option("--out", out_path, "output mask")->required();

  auto* cropi = app.add_subcommand("crop-informed",
                                   "segmentation-driven informed crop");
  add_config(cropi);
  cropi->add_option("--volume", in_path, "input volume")->required();
  cropi->add_option("--out", out_path, "cropped output volume")->required();
  cropi->add_option("--out-mask", mask_out, "cropped predicted mask");

  auto* tcls = app.add_subcommand("train-cls",
                                  "train and evaluate one classifier row");
  add_config(tcls);
  tcls->add_option("--row", row_str, "ablation row name");
  tcls->add_option("--seed", seeds, "seed (repeatable)");

  auto* pred = app.add_subcommand("predict",
                                  "score one volume with a trained classifier");
  add_config(pred);
  pred->add_option("--row", row_str, "ablation row name");
  pred->add_option("--seed", seeds, "classifier seed")->expected(1);
  pred->add_option("--volume", in_path, "input volume")->required();

  auto* eval = app.add_subcommand("evaluate",
                                  "recompute metrics from stored predictions");
  eval->add_option("--predictions", in_path, "predictions JSON")->required();

  auto* abl = app.add_subcommand("run-ablation", "full multi-row protocol");
  add_config(abl);
  abl->add_option("--seed", seeds, "seed override (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    simd::force_backend(backend);

    if (prep->parsed()) {
      phantom::PhantomParams params;
      params.shape = {shape[0], shape[1], shape[2]};
      auto manifest = phantom::generate_dataset(params, count, gen_seed, out_path);
      std::printf("wrote %zu cases under %s\n", manifest.cases.size(),
                  out_path.c_str());
      for (auto [label, n] : manifest.class_counts())
        std::printf("  label %d: %d cases\n", label, n);
    } else if (prepmsd->parsed()) {
      auto manifest = io::load_msd(in_path);
      manifest.check_unique_ids();
      std::printf("MSD task '%s': %zu labelled cases\n", manifest.name.c_str(),
                  manifest.cases.size());
    } else if (split->parsed()) {
      auto manifest = io::load_classification_manifest(manifest_path);
      auto [train, test] = io::stratified_split(manifest, test_fraction, split_seed);
      fs::create_directories(out_path);
      io::write_classification_manifest(
          (fs::path(out_path) / "train.tsv").string(), train);
      io::write_classification_manifest(
          (fs::path(out_path) / "test.tsv").string(), test);
      std::printf("train=%zu test=%zu\n", train.cases.size(), test.cases.size());
    } else if (tslice->parsed()) {
      pipeline::Orchestrator orch(load_cfg(config_path));
      orch.slice_model();
      std::printf("slice model ready (cache key %s)\n",
                  pipeline::stage_cache_key(orch.config(), "stage1").c_str());
    } else if (tseg->parsed()) {
      pipeline::Orchestrator orch(load_cfg(config_path));
      orch.seg_model();
      std::printf("segmentation model ready (cache key %s)\n",
                  pipeline::stage_cache_key(orch.config(), "stage2").c_str());
    } else if (cropz->parsed()) {
      pipeline::Orchestrator orch(load_cfg(config_path));
      io::PreprocessSpec spec;
      spec.hu_low = orch.config().hu_low;
      spec.hu_high = orch.config().hu_high;
      auto v = io::load_volume(in_path, spec);
      auto seq = stage1::fill_gaps(orch.slice_model().predict(v));
      auto [cropped, bbox] = stage1::z_crop(v, seq, orch.config().z_margin);
      io::write_nifti_volume(out_path, cropped);
      std::printf("kept slices %lld..%lld of %lld\n",
                  static_cast<long long>(bbox.lo[0]),
                  static_cast<long long>(bbox.hi[0]),
                  static_cast<long long>(v.shape[0]));
    } else if (pseg->parsed()) {
      pipeline::Orchestrator orch(load_cfg(config_path));
      io::PreprocessSpec spec;
      spec.hu_low = orch.config().hu_low;
      spec.hu_high = orch.config().hu_high;
      auto v = io::load_volume(in_path, spec);
      auto p = orch.seg_model().predict(v);
      io::write_nifti_mask(out_path, p.mask, v.spacing);
      std::printf("wrote %s\n", out_path.c_str());
    } else if (cropi->parsed()) {
      pipeline::Orchestrator orch(load_cfg(config_path));
      io::PreprocessSpec spec;
      spec.hu_low = orch.config().hu_low;
      spec.hu_high = orch.config().hu_high;
      auto v = io::load_volume(in_path, spec);
      auto p = orch.seg_model().predict(v);
      auto ic = stage2::informed_crop(v, p.mask, orch.config().informed_margin,
                                      orch.config().center_crop_size,
                                      orch.config().crop_foreground);
      io::write_nifti_volume(out_path, ic.volume);
      if (!mask_out.empty())
        io::write_nifti_mask(mask_out, ic.mask, ic.volume.spacing);
      std::printf("crop %s, fallback=%s\n", out_path.c_str(),
                  ic.used_fallback ? "yes" : "no");
    } else if (tcls->parsed()) {
      auto cfg = load_cfg(config_path);
      apply_seed_override(cfg, seeds);
      pipeline::Orchestrator orch(cfg);
      auto row = pipeline::row_from_name(row_str);
      for (std::uint64_t s : orch.config().seeds)
        print_run(orch.run_row_seed(row, s));
    } else if (pred->parsed()) {
      pipeline::Orchestrator orch(load_cfg(config_path));
      auto row = pipeline::row_from_name(row_str);
      const std::uint64_t s = seeds.empty() ? orch.config().seeds.front()
                                            : seeds.front();
      auto ck = nn::Checkpoint::load(orch.cls_checkpoint_path(row, s));
      stage3::ClassifierSpec spec;
      spec.in_channels = ck.config.at("in_channels").get<int>();
      spec.backbone = ck.config.at("backbone").get<std::string>() == "transferred"
                          ? stage3::Backbone::Transferred
                          : stage3::Backbone::Standalone;
      stage3::Classifier model(spec, s);
      model.from_checkpoint(ck);
      io::PreprocessSpec pp;
      pp.hu_low = orch.config().hu_low;
      pp.hu_high = orch.config().hu_high;
      auto v = io::load_volume(in_path, pp);
      const float score = model.predict_response(orch.row_input(row, v));
      std::printf("%s: score=%.6f predicted=%d\n", in_path.c_str(), score,
                  score >= 0.5f ? 1 : 0);
    } else if (eval->parsed()) {
      std::ifstream f(in_path);
      if (!f) throw std::runtime_error("cannot read " + in_path);
      auto j = nlohmann::json::parse(f);
      pipeline::RunResult run;
      run.row = pipeline::row_from_name(j.at("row").get<std::string>());
      run.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& c : j.at("cases")) {
        pipeline::CasePrediction p;
        p.case_id = c.at("case_id").get<std::string>();
        p.score = c.at("score").get<double>();
        p.label = c.at("label").get<int>();
        p.predicted = c.at("predicted").get<int>();
        run.predictions.push_back(std::move(p));
      }
      pipeline::compute_metrics(run);
      print_run(run);
    } else if (abl->parsed()) {
      auto cfg = load_cfg(config_path);
      apply_seed_override(cfg, seeds);
      pipeline::Orchestrator orch(cfg);
      auto report = orch.run();
      for (const auto& r : report.runs) print_run(r);
      for (const auto& s : report.summaries)
        std::printf("%-14s mcc %.4f ± %.4f | acc %.4f ± %.4f | auc %.4f ± %.4f\n",
                    pipeline::row_name(s.row).c_str(), s.mcc.mean, s.mcc.stddev,
                    s.accuracy.mean, s.accuracy.stddev, s.auc_roc.mean,
                    s.auc_roc.stddev);
      std::printf("table:  %s\njson:   %s\nfigure: %s\n",
                  report.table_csv_path.c_str(),
                  report.results_json_path.c_str(),
                  report.boxplot_path.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

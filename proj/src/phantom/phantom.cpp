#include "pdac/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

namespace fs = std::filesystem;

namespace pdac::phantom {

void PhantomParams::validate() const {
  const double half_min =
      0.5 * double(std::min({shape[0], shape[1], shape[2]}));
  for (const auto& r : {pancreas_radius_range, tumour_radius_range}) {
    if (r[0] <= 0 || r[1] < r[0])
      throw GenerationError("phantom: radius range must be positive and ordered");
    if (r[1] >= half_min)
      throw GenerationError("phantom: radii must be below half the smallest extent");
  }
  if (!(label_rule_threshold > 0.0 && label_rule_threshold < 1.0))
    throw GenerationError("phantom: label_rule_threshold must be in (0,1)");
  if (noise_sigma < 0)
    throw GenerationError("phantom: noise_sigma must be non-negative");
}

double tumour_ratio(const LabelMask& mask) {
  std::int64_t tumour = 0, region = 0;
  for (std::uint8_t v : mask.data) {
    if (v == 2) ++tumour;
    if (v == 1 || v == 2) ++region;
  }
  if (region == 0) return 0.0;
  return double(tumour) / double(region);
}

PhantomCase generate_case(const PhantomParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto& s = params.shape;
  const std::array<double, 3> center{double(s[0]) / 2.0, double(s[1]) / 2.0,
                                     double(s[2]) / 2.0};

  // pancreas sphere near the volume center
  const double rp = params.pancreas_radius_range[0] +
                    unit(rng) * (params.pancreas_radius_range[1] -
                                 params.pancreas_radius_range[0]);
  std::array<double, 3> pc;
  for (int a = 0; a < 3; ++a) pc[a] = center[a] + (unit(rng) * 2.0 - 1.0) * 3.0;

  // tumour sphere strictly inside the pancreas
  const double rt = params.tumour_radius_range[0] +
                    unit(rng) * (params.tumour_radius_range[1] -
                                 params.tumour_radius_range[0]);
  if (rt >= rp - 1.0)
    throw GenerationError("phantom: tumour radius " + std::to_string(rt) +
                          " does not fit inside pancreas radius " +
                          std::to_string(rp));
  std::array<double, 3> dir;
  double norm = 0.0;
  for (int a = 0; a < 3; ++a) {
    dir[a] = unit(rng) * 2.0 - 1.0;
    norm += dir[a] * dir[a];
  }
  norm = std::sqrt(std::max(norm, 1e-9));
  const double mag = unit(rng) * (rp - rt - 1.0);
  std::array<double, 3> tc;
  for (int a = 0; a < 3; ++a) tc[a] = pc[a] + dir[a] / norm * mag;

  // body ellipsoid for background contrast
  const std::array<double, 3> body_r{0.45 * double(s[0]), 0.45 * double(s[1]),
                                     0.45 * double(s[2])};

  PhantomCase out;
  out.volume = Volume(s);
  out.volume.spacing = {1.0, 1.0, 1.0};
  out.mask = LabelMask(s);
  std::normal_distribution<float> noise(0.0f, float(params.noise_sigma));

  for (std::int64_t z = 0; z < s[0]; ++z)
    for (std::int64_t y = 0; y < s[1]; ++y)
      for (std::int64_t x = 0; x < s[2]; ++x) {
        const double dz = double(z) - pc[0], dy = double(y) - pc[1],
                     dx = double(x) - pc[2];
        const double d_p = std::sqrt(dz * dz + dy * dy + dx * dx);
        const double tz = double(z) - tc[0], ty = double(y) - tc[1],
                     tx = double(x) - tc[2];
        const double d_t = std::sqrt(tz * tz + ty * ty + tx * tx);
        const double bz = (double(z) - center[0]) / body_r[0];
        const double by = (double(y) - center[1]) / body_r[1];
        const double bx = (double(x) - center[2]) / body_r[2];
        const bool in_body = bz * bz + by * by + bx * bx <= 1.0;

        float intensity = in_body ? 0.30f : 0.05f;
        if (d_t <= rt) {
          out.mask.at(z, y, x) = 2;
          intensity = 0.80f;
        } else if (d_p <= rp) {
          out.mask.at(z, y, x) = 1;
          intensity = 0.55f;
        }
        if (params.noise_sigma > 0) intensity += noise(rng);
        out.volume.at(z, y, x) = std::clamp(intensity, 0.0f, 1.0f);
      }

  out.response_label =
      tumour_ratio(out.mask) >= params.label_rule_threshold ? 1 : 0;
  return out;
}

io::DatasetManifest generate_dataset(const PhantomParams& params, int n,
                                     std::uint64_t seed,
                                     const std::string& out_root) {
  if (n < 2) throw GenerationError("phantom: dataset needs n >= 2");
  params.validate();
  fs::create_directories(fs::path(out_root) / "imagesTr");
  fs::create_directories(fs::path(out_root) / "labelsTr");

  const double r_lo = params.tumour_radius_range[0];
  const double r_hi = params.tumour_radius_range[1];
  const double r_mid = 0.5 * (r_lo + r_hi);

  io::DatasetManifest manifest;
  manifest.name = "phantom";
  nlohmann::json desc;
  desc["name"] = "phantom";
  desc["training"] = nlohmann::json::array();

  for (int i = 0; i < n; ++i) {
    PhantomParams p = params;
    // alternate small/large tumours so both response labels occur; keep a
    // dead zone around the midpoint to stay clear of the label threshold
    if (i % 2 == 0)
      p.tumour_radius_range = {r_lo, r_lo + 0.35 * (r_hi - r_lo)};
    else
      p.tumour_radius_range = {r_mid + 0.35 * (r_hi - r_mid), r_hi};

    const PhantomCase c = generate_case(p, seed + std::uint64_t(i));
    char id[32];
    std::snprintf(id, sizeof(id), "phantom_%03d", i);
    const std::string img = "imagesTr/" + std::string(id) + ".nii.gz";
    const std::string lab = "labelsTr/" + std::string(id) + ".nii.gz";
    io::write_nifti_volume((fs::path(out_root) / img).string(), c.volume);
    io::write_nifti_mask((fs::path(out_root) / lab).string(), c.mask,
                         c.volume.spacing);
    desc["training"].push_back({{"image", "./" + img}, {"label", "./" + lab}});

    CaseRecord rec;
    rec.case_id = id;
    rec.volume_path = (fs::path(out_root) / img).string();
    rec.mask_path = (fs::path(out_root) / lab).string();
    rec.response_label = c.response_label;
    manifest.cases.push_back(std::move(rec));
  }

  std::ofstream((fs::path(out_root) / "dataset.json").string())
      << desc.dump(2) << '\n';
  io::write_classification_manifest(
      (fs::path(out_root) / "manifest.tsv").string(), manifest);

  const auto counts = manifest.class_counts();
  if (counts.count(0) == 0 || counts.count(1) == 0)
    throw GenerationError(
        "phantom: generated dataset is single-class; widen tumour_radius_range "
        "or adjust label_rule_threshold");
  return manifest;
}

}  // namespace pdac::phantom

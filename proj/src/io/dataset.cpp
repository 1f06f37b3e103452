#include "pdac/io/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace pdac::io {

std::map<int, int> DatasetManifest::class_counts() const {
  std::map<int, int> counts;
  for (const auto& c : cases)
    if (c.response_label) ++counts[*c.response_label];
  return counts;
}

void DatasetManifest::check_unique_ids() const {
  std::set<std::string> seen;
  for (const auto& c : cases)
    if (!seen.insert(c.case_id).second)
      throw FormatError("manifest: duplicate case_id '" + c.case_id + "'");
}

namespace {

std::string strip_nii_ext(std::string name) {
  for (const char* ext : {".nii.gz", ".nii"}) {
    const std::size_t len = std::strlen(ext);
    if (name.size() > len && name.substr(name.size() - len) == ext)
      return name.substr(0, name.size() - len);
  }
  return name;
}

}  // namespace

DatasetManifest load_msd(const std::string& root) {
  const fs::path desc = fs::path(root) / "dataset.json";
  if (!fs::exists(desc))
    throw FormatError("load_msd: missing dataset description file " +
                      desc.string());
  std::ifstream f(desc);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded() || !j.contains("training"))
    throw FormatError("load_msd: unparsable dataset description " +
                      desc.string());

  DatasetManifest m;
  m.name = j.value("name", fs::path(root).filename().string());
  for (const auto& pair : j.at("training")) {
    CaseRecord rec;
    const fs::path img = fs::path(root) / pair.at("image").get<std::string>();
    const fs::path lab = fs::path(root) / pair.at("label").get<std::string>();
    if (!fs::exists(img))
      throw MissingFileError("load_msd: listed image not found: " +
                             img.string());
    if (!fs::exists(lab))
      throw MissingFileError("load_msd: listed label not found: " +
                             lab.string());
    rec.case_id = strip_nii_ext(img.filename().string());
    rec.volume_path = img.string();
    rec.mask_path = lab.string();
    m.cases.push_back(std::move(rec));
  }
  m.check_unique_ids();
  return m;
}

Volume load_volume(const std::string& path, const PreprocessSpec& spec) {
  if (spec.hu_low >= spec.hu_high)
    throw FormatError("load_volume: hu_window low must be < high");
  Volume v = read_nifti_volume(path);
  const float lo = static_cast<float>(spec.hu_low);
  const float hi = static_cast<float>(spec.hu_high);
  const float scale = 1.0f / (hi - lo);
  for (float& x : v.data) {
    if (!std::isfinite(x)) x = lo;
    x = (std::clamp(x, lo, hi) - lo) * scale;
  }
  if (spec.target_spacing) {
    const Index3 out = shape_for_spacing(v, *spec.target_spacing);
    v = resample_volume(v, out);
    v.spacing = *spec.target_spacing;
  }
  return v;
}

LabelMask load_mask(const std::string& path, const PreprocessSpec& spec) {
  LabelMask m = read_nifti_mask(path);
  if (spec.target_spacing) {
    // reuse image geometry for the target shape
    Volume geom;
    geom.shape = m.shape;
    geom.spacing = {1, 1, 1};
    Volume probe = read_nifti_volume(path);
    const Index3 out = shape_for_spacing(probe, *spec.target_spacing);
    m = resample_mask_nearest(m, out);
  }
  return m;
}

std::pair<DatasetManifest, DatasetManifest> stratified_split(
    const DatasetManifest& manifest, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw StratificationError("stratified_split: test_fraction must be in (0,1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < manifest.cases.size(); ++i) {
    const auto& c = manifest.cases[i];
    if (!c.response_label)
      throw StratificationError("stratified_split: case '" + c.case_id +
                                "' has no response_label");
    by_class[*c.response_label].push_back(i);
  }
  if (by_class.size() < 2)
    throw StratificationError("stratified_split: need at least two classes");
  for (const auto& [label, idx] : by_class)
    if (idx.empty())
      throw StratificationError("stratified_split: empty class " +
                                std::to_string(label));

  // canonical order, then seeded shuffle, for determinism across platforms
  std::mt19937_64 rng(seed);
  std::map<int, std::int64_t> test_counts;
  std::int64_t assigned = 0;
  for (auto& [label, idx] : by_class) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return manifest.cases[a].case_id < manifest.cases[b].case_id;
    });
    std::shuffle(idx.begin(), idx.end(), rng);
    test_counts[label] = std::llround(double(idx.size()) * test_fraction);
    assigned += test_counts[label];
  }
  // the largest class absorbs the remainder against the overall target
  const std::int64_t target =
      std::llround(double(manifest.cases.size()) * test_fraction);
  if (assigned != target) {
    auto largest = std::max_element(
        by_class.begin(), by_class.end(), [](const auto& a, const auto& b) {
          return a.second.size() < b.second.size();
        });
    test_counts[largest->first] += target - assigned;
  }

  DatasetManifest train, test;
  train.name = manifest.name + "-train";
  test.name = manifest.name + "-test";
  for (const auto& [label, idx] : by_class) {
    const std::int64_t n_test = std::clamp<std::int64_t>(
        test_counts[label], 0, static_cast<std::int64_t>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      CaseRecord rec = manifest.cases[idx[i]];
      rec.split = (static_cast<std::int64_t>(i) < n_test) ? Split::Test
                                                          : Split::Train;
      (rec.split == Split::Test ? test : train).cases.push_back(std::move(rec));
    }
  }
  auto by_id = [](const CaseRecord& a, const CaseRecord& b) {
    return a.case_id < b.case_id;
  };
  std::sort(train.cases.begin(), train.cases.end(), by_id);
  std::sort(test.cases.begin(), test.cases.end(), by_id);
  return {std::move(train), std::move(test)};
}

DatasetManifest load_classification_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingFileError("manifest: cannot read " + path);
  const fs::path base = fs::path(path).parent_path();
  DatasetManifest m;
  m.name = strip_nii_ext(fs::path(path).stem().string());
  std::string line;
  if (!std::getline(f, line))
    throw FormatError("manifest: empty file " + path);
  if (line.rfind("case_id", 0) != 0)
    throw FormatError("manifest: missing header row in " + path);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    CaseRecord rec;
    std::string label_str, mask_str;
    if (!std::getline(ss, rec.case_id, '\t') ||
        !std::getline(ss, rec.volume_path, '\t') ||
        !std::getline(ss, label_str, '\t'))
      throw FormatError("manifest: malformed row '" + line + "' in " + path);
    if (std::getline(ss, mask_str, '\t') && !mask_str.empty()) {
      fs::path mp(mask_str);
      rec.mask_path = (mp.is_absolute() ? mp : base / mp).string();
    }
    fs::path vp(rec.volume_path);
    rec.volume_path = (vp.is_absolute() ? vp : base / vp).string();
    rec.response_label = std::stoi(label_str);
    if (*rec.response_label != 0 && *rec.response_label != 1)
      throw FormatError("manifest: response_label must be 0 or 1 in " + path);
    m.cases.push_back(std::move(rec));
  }
  m.check_unique_ids();
  return m;
}

void write_classification_manifest(const std::string& path,
                                   const DatasetManifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("manifest: cannot write " + path);
  const fs::path base = fs::path(path).parent_path();
  f << "case_id\tvolume_path\tresponse_label\tmask_path\n";
  for (const auto& c : manifest.cases) {
    if (!c.response_label)
      throw FormatError("manifest: case '" + c.case_id +
                        "' has no response_label");
    f << c.case_id << '\t'
      << fs::relative(c.volume_path, base).string() << '\t'
      << *c.response_label << '\t'
      << (c.mask_path ? fs::relative(*c.mask_path, base).string() : "")
      << '\n';
  }
  if (!f) throw std::runtime_error("manifest: write failed for " + path);
}

Index3 shape_for_spacing(const Volume& v, const std::array<double, 3>& target) {
  Index3 out;
  for (int a = 0; a < 3; ++a) {
    if (target[a] <= 0)
      throw FormatError("resample: target spacing must be positive");
    out[a] = std::max<std::int64_t>(
        1, std::llround(double(v.shape[a]) * v.spacing[a] / target[a]));
  }
  return out;
}

Volume resample_volume(const Volume& v, Index3 out_shape) {
  Volume out(out_shape);
  out.origin = v.origin;
  for (int a = 0; a < 3; ++a)
    out.spacing[a] = v.spacing[a] * double(v.shape[a]) / double(out_shape[a]);
  // align-corners-off trilinear sampling
  const auto src_coord = [&](std::int64_t i, int a) {
    return (double(i) + 0.5) * double(v.shape[a]) / double(out_shape[a]) - 0.5;
  };
  for (std::int64_t z = 0; z < out_shape[0]; ++z) {
    const double fz = src_coord(z, 0);
    const std::int64_t z0 = std::clamp<std::int64_t>(
        std::int64_t(std::floor(fz)), 0, v.shape[0] - 1);
    const std::int64_t z1 = std::min(z0 + 1, v.shape[0] - 1);
    const double wz = std::clamp(fz - double(z0), 0.0, 1.0);
    for (std::int64_t y = 0; y < out_shape[1]; ++y) {
      const double fy = src_coord(y, 1);
      const std::int64_t y0 = std::clamp<std::int64_t>(
          std::int64_t(std::floor(fy)), 0, v.shape[1] - 1);
      const std::int64_t y1 = std::min(y0 + 1, v.shape[1] - 1);
      const double wy = std::clamp(fy - double(y0), 0.0, 1.0);
      for (std::int64_t x = 0; x < out_shape[2]; ++x) {
        const double fx = src_coord(x, 2);
        const std::int64_t x0 = std::clamp<std::int64_t>(
            std::int64_t(std::floor(fx)), 0, v.shape[2] - 1);
        const std::int64_t x1 = std::min(x0 + 1, v.shape[2] - 1);
        const double wx = std::clamp(fx - double(x0), 0.0, 1.0);
        const double c00 = v.at(z0, y0, x0) * (1 - wx) + v.at(z0, y0, x1) * wx;
        const double c01 = v.at(z0, y1, x0) * (1 - wx) + v.at(z0, y1, x1) * wx;
        const double c10 = v.at(z1, y0, x0) * (1 - wx) + v.at(z1, y0, x1) * wx;
        const double c11 = v.at(z1, y1, x0) * (1 - wx) + v.at(z1, y1, x1) * wx;
        const double c0 = c00 * (1 - wy) + c01 * wy;
        const double c1 = c10 * (1 - wy) + c11 * wy;
        out.at(z, y, x) = static_cast<float>(c0 * (1 - wz) + c1 * wz);
      }
    }
  }
  return out;
}

LabelMask resample_mask_nearest(const LabelMask& m, Index3 out_shape) {
  LabelMask out(out_shape);
  for (std::int64_t z = 0; z < out_shape[0]; ++z) {
    const std::int64_t sz = std::clamp<std::int64_t>(
        std::int64_t((double(z) + 0.5) * double(m.shape[0]) /
                     double(out_shape[0])),
        0, m.shape[0] - 1);
    for (std::int64_t y = 0; y < out_shape[1]; ++y) {
      const std::int64_t sy = std::clamp<std::int64_t>(
          std::int64_t((double(y) + 0.5) * double(m.shape[1]) /
                       double(out_shape[1])),
          0, m.shape[1] - 1);
      for (std::int64_t x = 0; x < out_shape[2]; ++x) {
        const std::int64_t sx = std::clamp<std::int64_t>(
            std::int64_t((double(x) + 0.5) * double(m.shape[2]) /
                         double(out_shape[2])),
            0, m.shape[2] - 1);
        out.at(z, y, x) = m.at(sz, sy, sx);
      }
    }
  }
  return out;
}

}  // namespace pdac::io

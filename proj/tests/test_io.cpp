#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "pdac/io/dataset.hpp"

using namespace pdac;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Volume make_volume(Index3 shape, float fill) {
  Volume v(shape, fill);
  v.spacing = {2.0, 0.8, 0.8};
  return v;
}

}  // namespace

TEST_CASE("nifti volume round-trip, plain and gzipped") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> d(-100.0f, 300.0f);
  Volume v({5, 6, 7});
  for (auto& x : v.data) x = d(rng);
  v.spacing = {2.5, 0.7, 0.7};
  v.origin = {-10.0, 4.0, 4.0};

  for (const char* ext : {"t.nii", "t.nii.gz"}) {
    const auto path = (temp_dir("nifti_rt") / ext).string();
    io::write_nifti_volume(path, v);
    auto back = io::read_nifti_volume(path);
    REQUIRE(back.shape == v.shape);
    REQUIRE(back.data == v.data);
    for (int a = 0; a < 3; ++a) {
      CHECK(back.spacing[a] == doctest::Approx(v.spacing[a]));
      CHECK(back.origin[a] == doctest::Approx(v.origin[a]));
    }
  }
}

TEST_CASE("nifti mask round-trip") {
  LabelMask m({4, 5, 6});
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> cls(0, 2);
  for (auto& x : m.data) x = static_cast<std::uint8_t>(cls(rng));
  const auto path = (temp_dir("nifti_mask") / "m.nii.gz").string();
  io::write_nifti_mask(path, m, {2.0, 1.0, 1.0});
  auto back = io::read_nifti_mask(path);
  REQUIRE(back.shape == m.shape);
  REQUIRE(back.data == m.data);
}

TEST_CASE("nifti rejects missing and malformed files") {
  CHECK_THROWS_AS(io::read_nifti_volume("/nonexistent/x.nii"),
                  io::MissingFileError);
  const auto bad = (temp_dir("nifti_bad") / "junk.nii").string();
  std::ofstream(bad) << "this is not a nifti header";
  CHECK_THROWS_AS(io::read_nifti_volume(bad), io::FormatError);
}

TEST_CASE("volume loading clamps and rescales the intensity window") {
  const auto dir = temp_dir("io_window");
  io::PreprocessSpec spec;
  spec.hu_low = -100.0;
  spec.hu_high = 300.0;

  auto lo = make_volume({2, 3, 3}, -100.0f);
  io::write_nifti_volume((dir / "lo.nii.gz").string(), lo);
  for (float x : io::load_volume((dir / "lo.nii.gz").string(), spec).data)
    CHECK(x == 0.0f);

  auto hi = make_volume({2, 3, 3}, 300.0f);
  io::write_nifti_volume((dir / "hi.nii.gz").string(), hi);
  for (float x : io::load_volume((dir / "hi.nii.gz").string(), spec).data)
    CHECK(x == 1.0f);

  Volume mixed({1, 1, 3});
  mixed.data = {-200.0f, 0.0f, 400.0f};
  io::write_nifti_volume((dir / "mix.nii.gz").string(), mixed);
  auto got = io::load_volume((dir / "mix.nii.gz").string(), spec);
  CHECK(got.data[0] == doctest::Approx(0.0));
  CHECK(got.data[1] == doctest::Approx(0.25));
  CHECK(got.data[2] == doctest::Approx(1.0));
  for (float x : got.data) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
  }
}

TEST_CASE("msd layout loading") {
  const auto root = temp_dir("msd_root");
  fs::create_directories(root / "imagesTr");
  fs::create_directories(root / "labelsTr");
  nlohmann::json ds;
  ds["name"] = "TinyTask";
  ds["training"] = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    const std::string img = "imagesTr/case_" + std::to_string(i) + ".nii.gz";
    const std::string lab = "labelsTr/case_" + std::to_string(i) + ".nii.gz";
    io::write_nifti_volume((root / img).string(), make_volume({3, 4, 4}, 1.0f));
    LabelMask m({3, 4, 4});
    m.at(1, 1, 1) = 1;
    io::write_nifti_mask((root / lab).string(), m, {1, 1, 1});
    ds["training"].push_back({{"image", "./" + img}, {"label", "./" + lab}});
  }
  std::ofstream(root / "dataset.json") << ds.dump(2);

  auto manifest = io::load_msd(root.string());
  REQUIRE(manifest.cases.size() == 3);
  for (const auto& c : manifest.cases) {
    CHECK(c.mask_path.has_value());
    CHECK_FALSE(c.response_label.has_value());
  }

  SUBCASE("missing description file") {
    CHECK_THROWS_AS(io::load_msd((root / "imagesTr").string()),
                    io::FormatError);
  }
  SUBCASE("deleted label file is reported by name") {
    fs::remove(root / "labelsTr" / "case_1.nii.gz");
    try {
      io::load_msd(root.string());
      FAIL("expected MissingFileError");
    } catch (const io::MissingFileError& e) {
      CHECK(std::string(e.what()).find("case_1") != std::string::npos);
    }
  }
}

TEST_CASE("stratified split hits per-class counts") {
  io::DatasetManifest m;
  m.name = "big";
  for (int i = 0; i < 477; ++i) {
    CaseRecord r;
    r.case_id = "case_" + std::to_string(1000 + i);
    r.volume_path = "unused.nii.gz";
    r.response_label = i < 171 ? 1 : 0;
    m.cases.push_back(r);
  }
  auto [train, test] = io::stratified_split(m, 57.0 / 477.0, 13);
  CHECK(test.cases.size() == 57);
  CHECK(train.cases.size() == 420);
  CHECK(test.class_counts().at(1) == 20);
  CHECK(test.class_counts().at(0) == 37);
  CHECK(train.class_counts().at(1) == 151);
  CHECK(train.class_counts().at(0) == 269);
}

TEST_CASE("stratified split: small balanced case, determinism, partition") {
  io::DatasetManifest m;
  for (int i = 0; i < 10; ++i) {
    CaseRecord r;
    r.case_id = "c" + std::to_string(i);
    r.volume_path = "x";
    r.response_label = i % 2;
    m.cases.push_back(r);
  }
  auto [train, test] = io::stratified_split(m, 0.2, 99);
  CHECK(test.cases.size() == 2);
  CHECK(test.class_counts().at(0) == 1);
  CHECK(test.class_counts().at(1) == 1);

  auto [train2, test2] = io::stratified_split(m, 0.2, 99);
  auto ids = [](const io::DatasetManifest& d) {
    std::set<std::string> s;
    for (const auto& c : d.cases) s.insert(c.case_id);
    return s;
  };
  CHECK(ids(train) == ids(train2));
  CHECK(ids(test) == ids(test2));

  // disjoint and jointly exhaustive over random fractions and seeds
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> frac(0.15, 0.85);
  for (int it = 0; it < 50; ++it) {
    auto [tr, te] = io::stratified_split(m, frac(rng), rng());
    auto a = ids(tr), b = ids(te);
    CHECK(a.size() + b.size() == 10);
    for (const auto& id : b) CHECK(a.count(id) == 0);
  }

  io::DatasetManifest single;
  CaseRecord r;
  r.case_id = "only";
  r.volume_path = "x";
  r.response_label = 1;
  single.cases.push_back(r);
  CHECK_THROWS_AS(io::stratified_split(single, 0.5, 1),
                  io::StratificationError);
}

TEST_CASE("classification manifest round-trip") {
  const auto dir = temp_dir("manifest_rt");
  io::DatasetManifest m;
  m.name = "mini";
  for (int i = 0; i < 4; ++i) {
    CaseRecord r;
    r.case_id = "p" + std::to_string(i);
    r.volume_path = (dir / ("v" + std::to_string(i) + ".nii.gz")).string();
    if (i % 2) r.mask_path = (dir / ("m" + std::to_string(i) + ".nii.gz")).string();
    r.response_label = i % 2;
    m.cases.push_back(r);
  }
  const auto path = (dir / "manifest.tsv").string();
  io::write_classification_manifest(path, m);
  auto back = io::load_classification_manifest(path);
  REQUIRE(back.cases.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.cases[i].case_id == m.cases[i].case_id);
    CHECK(fs::path(back.cases[i].volume_path) ==
          fs::path(m.cases[i].volume_path));
    CHECK(back.cases[i].response_label == m.cases[i].response_label);
    CHECK(back.cases[i].mask_path.has_value() ==
          m.cases[i].mask_path.has_value());
  }
}

TEST_CASE("resampling preserves mask classes and hits target shapes") {
  std::mt19937_64 rng(17);
  LabelMask m({6, 8, 8});
  std::uniform_int_distribution<int> cls(0, 2);
  for (auto& v : m.data) v = static_cast<std::uint8_t>(cls(rng));
  auto up = io::resample_mask_nearest(m, {12, 16, 16});
  REQUIRE(up.shape == Index3{12, 16, 16});
  for (auto v : up.data) CHECK(v <= 2);
  auto down = io::resample_mask_nearest(m, {3, 4, 4});
  for (auto v : down.data) CHECK(v <= 2);

  Volume vol({4, 4, 4}, 0.7f);
  auto rv = io::resample_volume(vol, {7, 9, 5});
  REQUIRE(rv.shape == Index3{7, 9, 5});
  // constant field stays constant under trilinear interpolation
  for (float x : rv.data) CHECK(x == doctest::Approx(0.7f));
}

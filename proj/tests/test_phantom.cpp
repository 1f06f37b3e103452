#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <filesystem>

#include "pdac/phantom/phantom.hpp"

using namespace pdac;
namespace fs = std::filesystem;

namespace {

phantom::PhantomParams small_params() {
  phantom::PhantomParams p;
  p.shape = {32, 48, 48};
  p.pancreas_radius_range = {8.0, 11.0};
  p.tumour_radius_range = {2.0, 6.0};
  return p;
}

std::int64_t count_class(const LabelMask& m, int cls) {
  std::int64_t n = 0;
  for (auto v : m.data)
    if (v == cls) ++n;
  return n;
}

// 6-connected flood fill over pancreas-region voxels (classes 1 and 2).
bool region_connected(const LabelMask& m) {
  std::vector<char> seen(m.data.size(), 0);
  std::deque<Index3> queue;
  std::int64_t total = 0;
  for (std::int64_t z = 0; z < m.shape[0] && queue.empty(); ++z)
    for (std::int64_t y = 0; y < m.shape[1] && queue.empty(); ++y)
      for (std::int64_t x = 0; x < m.shape[2] && queue.empty(); ++x)
        if (m.at(z, y, x) != 0) queue.push_back({z, y, x});
  for (auto v : m.data) total += (v != 0);
  if (queue.empty()) return total == 0;
  std::int64_t visited = 0;
  seen[static_cast<std::size_t>(
      (queue[0][0] * m.shape[1] + queue[0][1]) * m.shape[2] + queue[0][2])] = 1;
  while (!queue.empty()) {
    auto [z, y, x] = queue.front();
    queue.pop_front();
    ++visited;
    const Index3 deltas[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                              {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& d : deltas) {
      const std::int64_t nz = z + d[0], ny = y + d[1], nx = x + d[2];
      if (nz < 0 || ny < 0 || nx < 0 || nz >= m.shape[0] ||
          ny >= m.shape[1] || nx >= m.shape[2])
        continue;
      const auto idx = static_cast<std::size_t>(
          (nz * m.shape[1] + ny) * m.shape[2] + nx);
      if (!seen[idx] && m.data[idx] != 0) {
        seen[idx] = 1;
        queue.push_back({nz, ny, nx});
      }
    }
  }
  return visited == total;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  auto p = small_params();
  auto a = phantom::generate_case(p, 7);
  auto b = phantom::generate_case(p, 7);
  CHECK(a.volume.data == b.volume.data);
  CHECK(a.mask.data == b.mask.data);
  CHECK(a.response_label == b.response_label);
  auto c = phantom::generate_case(p, 8);
  CHECK(a.volume.data != c.volume.data);
}

TEST_CASE("label rule extremes") {
  auto p = small_params();
  p.noise_sigma = 0.0;

  p.tumour_radius_range = {6.0, 6.0};  // largest allowed tumour
  p.label_rule_threshold = 0.01;
  for (std::uint64_t s = 0; s < 5; ++s)
    CHECK(phantom::generate_case(p, s).response_label == 1);

  p.tumour_radius_range = {2.0, 2.0};
  p.label_rule_threshold = 0.99;
  for (std::uint64_t s = 0; s < 5; ++s)
    CHECK(phantom::generate_case(p, s).response_label == 0);
}

TEST_CASE("label is recomputable from the stored mask") {
  auto p = small_params();
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto c = phantom::generate_case(p, s);
    const double ratio = phantom::tumour_ratio(c.mask);
    CHECK((ratio >= p.label_rule_threshold) == (c.response_label == 1));
    const double direct =
        double(count_class(c.mask, 2)) /
        double(count_class(c.mask, 1) + count_class(c.mask, 2));
    CHECK(ratio == doctest::Approx(direct));
  }
}

TEST_CASE("phantom geometry is well-formed") {
  auto p = small_params();
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto c = phantom::generate_case(p, s);
    CHECK(count_class(c.mask, 1) > 0);
    CHECK(count_class(c.mask, 2) > 0);
    CHECK(region_connected(c.mask));
    for (float v : c.volume.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("infeasible geometry is rejected") {
  auto p = small_params();
  p.tumour_radius_range = {10.5, 10.9};  // cannot fit inside the pancreas
  CHECK_THROWS_AS(phantom::generate_case(p, 1), phantom::GenerationError);

  phantom::PhantomParams bad = small_params();
  bad.pancreas_radius_range = {30.0, 40.0};  // exceeds half the z extent
  CHECK_THROWS(bad.validate());
}

TEST_CASE("dataset generation round-trips through the loaders") {
  const auto root = fs::temp_directory_path() / "phantom_ds";
  fs::remove_all(root);
  auto p = small_params();
  auto manifest = phantom::generate_dataset(p, 10, 3, root.string());
  REQUIRE(manifest.cases.size() == 10);
  CHECK(manifest.class_counts().at(0) > 0);
  CHECK(manifest.class_counts().at(1) > 0);

  auto msd = io::load_msd(root.string());
  CHECK(msd.cases.size() == 10);

  auto reloaded =
      io::load_classification_manifest((root / "manifest.tsv").string());
  REQUIRE(reloaded.cases.size() == 10);
  io::PreprocessSpec spec;
  spec.hu_low = 0.0;
  spec.hu_high = 1.0;
  for (std::size_t i = 0; i < reloaded.cases.size(); ++i) {
    CHECK(reloaded.cases[i].response_label ==
          manifest.cases[i].response_label);
    // stored mask reproduces the stored label
    auto m = io::load_mask(*reloaded.cases[i].mask_path, spec);
    CHECK((phantom::tumour_ratio(m) >= p.label_rule_threshold) ==
          (*reloaded.cases[i].response_label == 1));
  }
}

TEST_CASE("larger datasets stay roughly balanced") {
  auto p = small_params();
  const auto root = fs::temp_directory_path() / "phantom_balance";
  fs::remove_all(root);
  auto manifest = phantom::generate_dataset(p, 40, 11, root.string());
  const auto counts = manifest.class_counts();
  CHECK(counts.at(0) >= 12);
  CHECK(counts.at(1) >= 12);
}

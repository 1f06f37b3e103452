#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "pdac/core/geometry.hpp"

using namespace pdac;

namespace {

LabelMask random_mask(Index3 shape, std::mt19937_64& rng) {
  LabelMask m(shape);
  std::uniform_int_distribution<int> cls(0, 2);
  for (auto& v : m.data) v = static_cast<std::uint8_t>(cls(rng));
  return m;
}

// Independent min/max scan over foreground coordinates.
bool oracle_bbox(const LabelMask& m, const std::set<int>& fg, Index3 margin,
                 BBox3& out) {
  bool any = false;
  Index3 lo{m.shape[0], m.shape[1], m.shape[2]}, hi{-1, -1, -1};
  for (std::int64_t z = 0; z < m.shape[0]; ++z)
    for (std::int64_t y = 0; y < m.shape[1]; ++y)
      for (std::int64_t x = 0; x < m.shape[2]; ++x)
        if (fg.count(m.at(z, y, x))) {
          any = true;
          lo = {std::min(lo[0], z), std::min(lo[1], y), std::min(lo[2], x)};
          hi = {std::max(hi[0], z), std::max(hi[1], y), std::max(hi[2], x)};
        }
  if (!any) return false;
  for (int a = 0; a < 3; ++a) {
    out.lo[a] = std::max<std::int64_t>(0, lo[a] - margin[a]);
    out.hi[a] = std::min(m.shape[a] - 1, hi[a] + margin[a]);
  }
  return true;
}

}  // namespace

TEST_CASE("one-hot worked values") {
  LabelMask single({1, 1, 1});
  auto ch = one_hot_mask(single, 3);
  REQUIRE(ch.size() == 3);
  CHECK(ch[0].at(0, 0, 0) == 1.0f);
  CHECK(ch[1].at(0, 0, 0) == 0.0f);
  CHECK(ch[2].at(0, 0, 0) == 0.0f);

  LabelMask zeros({4, 4, 4});
  ch = one_hot_mask(zeros, 3);
  for (float v : ch[0].data) CHECK(v == 1.0f);
  for (float v : ch[1].data) CHECK(v == 0.0f);
  for (float v : ch[2].data) CHECK(v == 0.0f);

  LabelMask bad({1, 1, 1});
  bad.at(0, 0, 0) = 3;
  CHECK_THROWS_AS(one_hot_mask(bad, 3), InvalidLabelError);
}

TEST_CASE("one-hot round-trips through argmax") {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 50; ++it) {
    auto m = random_mask({5, 5, 5}, rng);
    auto ch = one_hot_mask(m, 3);
    // channels partition every voxel
    for (std::int64_t i = 0; i < m.numel(); ++i)
      CHECK(ch[0].data[i] + ch[1].data[i] + ch[2].data[i] == 1.0f);
    auto back = argmax_channels(ch);
    REQUIRE(back.data == m.data);
  }
}

TEST_CASE("bbox worked values") {
  LabelMask m({10, 10, 10});
  m.at(3, 4, 5) = 1;
  auto b = bbox_from_mask(m, {1, 2}, {0, 0, 0});
  CHECK(b.lo == Index3{3, 4, 5});
  CHECK(b.hi == Index3{3, 4, 5});

  LabelMask two({10, 10, 10});
  two.at(1, 1, 1) = 1;
  two.at(6, 2, 9) = 2;
  b = bbox_from_mask(two, {1, 2}, {0, 0, 0});
  CHECK(b.lo == Index3{1, 1, 1});
  CHECK(b.hi == Index3{6, 2, 9});

  b = bbox_from_mask(two, {1, 2}, {2, 2, 2});
  CHECK(b.lo == Index3{0, 0, 0});
  CHECK(b.hi == Index3{8, 4, 9});

  LabelMask empty({4, 4, 4});
  CHECK_THROWS_AS(bbox_from_mask(empty, {1, 2}, {0, 0, 0}),
                  EmptyForegroundError);
}

TEST_CASE("bbox matches brute-force oracle and is tight") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::int64_t> dim(2, 9);
  std::uniform_int_distribution<std::int64_t> mg(0, 3);
  int done = 0;
  while (done < 500) {
    Index3 shape{dim(rng), dim(rng), dim(rng)};
    auto m = random_mask(shape, rng);
    Index3 margin{mg(rng), mg(rng), mg(rng)};
    BBox3 want;
    if (!oracle_bbox(m, {1, 2}, margin, want)) continue;
    auto got = bbox_from_mask(m, {1, 2}, margin);
    REQUIRE(got.lo == want.lo);
    REQUIRE(got.hi == want.hi);
    // every foreground voxel is inside the box
    for (std::int64_t z = 0; z < shape[0]; ++z)
      for (std::int64_t y = 0; y < shape[1]; ++y)
        for (std::int64_t x = 0; x < shape[2]; ++x)
          if (m.at(z, y, x) != 0) REQUIRE(got.contains(z, y, x));
    if (margin == Index3{0, 0, 0}) {
      // tightness: every face touches at least one foreground voxel
      auto face_has_fg = [&](int axis, std::int64_t plane) {
        for (std::int64_t z = got.lo[0]; z <= got.hi[0]; ++z)
          for (std::int64_t y = got.lo[1]; y <= got.hi[1]; ++y)
            for (std::int64_t x = got.lo[2]; x <= got.hi[2]; ++x) {
              const Index3 p{z, y, x};
              if (p[axis] == plane && m.at(z, y, x) != 0) return true;
            }
        return false;
      };
      for (int a = 0; a < 3; ++a) {
        REQUIRE(face_has_fg(a, got.lo[a]));
        REQUIRE(face_has_fg(a, got.hi[a]));
      }
    }
    ++done;
  }
}

TEST_CASE("crop worked values") {
  Volume v({8, 8, 8});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> val(0, 1);
  for (auto& f : v.data) f = val(rng);
  v.spacing = {2.0, 1.5, 1.0};

  auto full = crop(v, BBox3{{0, 0, 0}, {7, 7, 7}});
  CHECK(full.data == v.data);

  auto sub = crop(v, BBox3{{2, 2, 2}, {5, 5, 5}});
  REQUIRE(sub.shape == Index3{4, 4, 4});
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 4; ++x)
        REQUIRE(sub.at(z, y, x) == v.at(z + 2, y + 2, x + 2));
  CHECK(sub.spacing == v.spacing);
  CHECK(sub.origin[0] == doctest::Approx(2 * 2.0));
  CHECK(sub.origin[1] == doctest::Approx(2 * 1.5));
  CHECK(sub.origin[2] == doctest::Approx(2 * 1.0));

  // cropping the result with its own full extent is the identity
  auto again = crop(sub, BBox3{{0, 0, 0}, {3, 3, 3}});
  CHECK(again.data == sub.data);

  CHECK_THROWS_AS(crop(v, BBox3{{0, 0, 0}, {8, 7, 7}}), IndexError);
}

TEST_CASE("crop matches direct slicing on random instances") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::int64_t> dim(2, 9);
  std::uniform_real_distribution<float> val(0, 1);
  for (int it = 0; it < 500; ++it) {
    Index3 shape{dim(rng), dim(rng), dim(rng)};
    Volume v(shape);
    for (auto& f : v.data) f = val(rng);
    BBox3 b;
    for (int a = 0; a < 3; ++a) {
      std::uniform_int_distribution<std::int64_t> d(0, shape[a] - 1);
      auto i = d(rng), j = d(rng);
      b.lo[a] = std::min(i, j);
      b.hi[a] = std::max(i, j);
    }
    auto c = crop(v, b);
    REQUIRE(c.shape == b.extents());
    for (int a = 0; a < 3; ++a) REQUIRE(c.shape[a] <= v.shape[a]);
    for (std::int64_t z = 0; z < c.shape[0]; ++z)
      for (std::int64_t y = 0; y < c.shape[1]; ++y)
        for (std::int64_t x = 0; x < c.shape[2]; ++x)
          REQUIRE(c.at(z, y, x) ==
                  v.at(b.lo[0] + z, b.lo[1] + y, b.lo[2] + x));
  }
}

TEST_CASE("crop retains all foreground voxels of the source mask") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::int64_t> dim(3, 8);
  std::uniform_int_distribution<std::int64_t> mg(0, 2);
  int done = 0;
  while (done < 200) {
    Index3 shape{dim(rng), dim(rng), dim(rng)};
    auto m = random_mask(shape, rng);
    std::int64_t fg = std::count_if(m.data.begin(), m.data.end(),
                                    [](std::uint8_t v) { return v != 0; });
    if (fg == 0) continue;
    Index3 margin{mg(rng), mg(rng), mg(rng)};
    auto c = crop(m, bbox_from_mask(m, {1, 2}, margin));
    std::int64_t kept = std::count_if(c.data.begin(), c.data.end(),
                                      [](std::uint8_t v) { return v != 0; });
    REQUIRE(kept == fg);
    ++done;
  }
}

TEST_CASE("center crop worked values") {
  Volume v({1, 6, 6});
  for (std::int64_t i = 0; i < v.numel(); ++i) v.data[i] = float(i);

  auto same = center_crop(v, 6, 6);
  CHECK(same.data == v.data);

  auto c = center_crop(v, 4, 4);
  REQUIRE(c.shape == Index3{1, 4, 4});
  for (std::int64_t y = 0; y < 4; ++y)
    for (std::int64_t x = 0; x < 4; ++x)
      REQUIRE(c.at(0, y, x) == v.at(0, y + 1, x + 1));

  Volume odd({1, 5, 5});
  for (std::int64_t i = 0; i < odd.numel(); ++i) odd.data[i] = float(i);
  auto co = center_crop(odd, 4, 4);
  // tie broken toward the lower index: window starts at 0
  for (std::int64_t y = 0; y < 4; ++y)
    for (std::int64_t x = 0; x < 4; ++x)
      REQUIRE(co.at(0, y, x) == odd.at(0, y, x));

  CHECK_THROWS_AS(center_crop(odd, 6, 4), SizeError);
}

TEST_CASE("center crop window arithmetic on random sizes") {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<std::int64_t> dim(1, 12);
  for (int it = 0; it < 500; ++it) {
    Index3 shape{dim(rng), dim(rng), dim(rng)};
    std::uniform_int_distribution<std::int64_t> oy(1, shape[1]);
    std::uniform_int_distribution<std::int64_t> ox(1, shape[2]);
    const std::int64_t wy = oy(rng), wx = ox(rng);
    auto b = center_crop_bbox(shape, wy, wx);
    REQUIRE(b.lo[0] == 0);
    REQUIRE(b.hi[0] == shape[0] - 1);
    REQUIRE(b.lo[1] == (shape[1] - wy) / 2);
    REQUIRE(b.lo[2] == (shape[2] - wx) / 2);
    REQUIRE(b.extents() == Index3{shape[0], wy, wx});
  }
}

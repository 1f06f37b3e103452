#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "pdac/phantom/phantom.hpp"
#include "pdac/stage2/seg.hpp"

using namespace pdac;

TEST_CASE("dice worked values") {
  LabelMask a({2, 3, 3}), b({2, 3, 3});
  a.at(0, 0, 0) = 1;
  a.at(0, 0, 1) = 1;
  b.at(0, 0, 0) = 1;
  b.at(0, 0, 1) = 1;
  CHECK(stage2::dice(a, b, 1) == doctest::Approx(1.0));

  LabelMask c({2, 3, 3}), d({2, 3, 3});
  c.at(0, 0, 0) = 1;
  c.at(0, 0, 1) = 1;
  d.at(1, 1, 1) = 1;
  d.at(1, 1, 2) = 1;
  CHECK(stage2::dice(c, d, 1) == doctest::Approx(0.0));

  // 6 predicted, 4 true, 3 overlapping
  LabelMask p({1, 4, 4}), t({1, 4, 4});
  for (int i = 0; i < 6; ++i) p.data[static_cast<std::size_t>(i)] = 2;
  for (int i = 3; i < 7; ++i) t.data[static_cast<std::size_t>(i)] = 2;
  CHECK(stage2::dice(p, t, 2) == doctest::Approx(0.6));

  // both empty
  CHECK(stage2::dice(LabelMask({2, 2, 2}), LabelMask({2, 2, 2}), 2) == 1.0);

  // all-background prediction scores zero against nonempty truth
  CHECK(stage2::dice(LabelMask({1, 4, 4}), t, 2) == doctest::Approx(0.0));
}

TEST_CASE("dice is symmetric and bounded") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 2);
  for (int it = 0; it < 200; ++it) {
    LabelMask a({3, 4, 4}), b({3, 4, 4});
    for (auto& v : a.data) v = static_cast<std::uint8_t>(cls(rng));
    for (auto& v : b.data) v = static_cast<std::uint8_t>(cls(rng));
    for (int c = 1; c <= 2; ++c) {
      const double ab = stage2::dice(a, b, c);
      REQUIRE(ab == stage2::dice(b, a, c));
      REQUIRE(ab >= 0.0);
      REQUIRE(ab <= 1.0);
    }
  }
}

TEST_CASE("informed crop follows the predicted bounding box") {
  Volume v({12, 12, 12}, 0.5f);
  LabelMask pred({12, 12, 12});
  for (std::int64_t z = 4; z < 8; ++z)
    for (std::int64_t y = 4; y < 8; ++y)
      for (std::int64_t x = 4; x < 8; ++x) pred.at(z, y, x) = 1;

  auto ic = stage2::informed_crop(v, pred, {0, 0, 0}, {6, 6});
  CHECK_FALSE(ic.used_fallback);
  CHECK(ic.volume.shape == Index3{4, 4, 4});
  CHECK(ic.mask.shape == Index3{4, 4, 4});
  // all predicted foreground survives the crop
  std::int64_t fg = 0;
  for (auto m : ic.mask.data) fg += m != 0;
  CHECK(fg == 64);

  auto margins = stage2::informed_crop(v, pred, {2, 2, 2}, {6, 6});
  CHECK(margins.volume.shape == Index3{8, 8, 8});

  SUBCASE("empty prediction falls back to a center crop") {
    LabelMask empty({12, 12, 12});
    auto fb = stage2::informed_crop(v, empty, {0, 0, 0}, {6, 6});
    CHECK(fb.used_fallback);
    CHECK(fb.volume.shape == Index3{12, 6, 6});
    for (auto m : fb.mask.data) CHECK(m == 0);
  }
  SUBCASE("full-foreground prediction is the identity crop") {
    LabelMask full({12, 12, 12}, 1);
    auto id = stage2::informed_crop(v, full, {0, 0, 0}, {6, 6});
    CHECK(id.volume.shape == v.shape);
    CHECK(id.volume.data == v.data);
  }
}

TEST_CASE("forwarded channels are intensity plus one-hot") {
  std::mt19937_64 rng(9);
  Volume v({3, 4, 4});
  std::uniform_real_distribution<float> d(0, 1);
  for (auto& x : v.data) x = d(rng);
  LabelMask m({3, 4, 4});
  std::uniform_int_distribution<int> cls(0, 2);
  for (auto& x : m.data) x = static_cast<std::uint8_t>(cls(rng));

  auto t = stage2::forward_channels(v, m);
  REQUIRE(t.shape == std::vector<std::int64_t>{4, 3, 4, 4});
  const std::int64_t n = v.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    REQUIRE(t.v[static_cast<std::size_t>(i)] == v.data[static_cast<std::size_t>(i)]);
    // argmax over the mask channels reproduces the mask
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (t.v[static_cast<std::size_t>((1 + c) * n + i)] >
          t.v[static_cast<std::size_t>((1 + best) * n + i)])
        best = c;
    REQUIRE(best == m.data[static_cast<std::size_t>(i)]);
  }

  LabelMask allbg({3, 4, 4});
  auto tb = stage2::forward_channels(v, allbg);
  for (std::int64_t i = 0; i < n; ++i) {
    CHECK(tb.v[static_cast<std::size_t>(2 * n + i)] == 0.0f);
    CHECK(tb.v[static_cast<std::size_t>(3 * n + i)] == 0.0f);
  }

  CHECK_THROWS_AS(stage2::forward_channels(v, LabelMask({3, 4, 5})),
                  ShapeError);
}

TEST_CASE("prediction output shape equals input shape, odd sizes included") {
  stage2::UNet3d net(3);
  net.mark_trained();
  net.inference_window = {16, 16, 16};
  Volume v({9, 13, 17}, 0.2f);
  auto p = net.predict(v);
  CHECK(p.mask.shape == v.shape);

  Volume larger({18, 20, 20}, 0.2f);  // forces sliding windows
  auto p2 = net.predict(larger);
  CHECK(p2.mask.shape == larger.shape);

  auto p3 = net.predict(larger);
  CHECK(p2.mask.data == p3.mask.data);  // deterministic inference
}

TEST_CASE("training rejects masks with an absent class") {
  std::vector<stage2::TrainingCase> cases;
  LabelMask no_tumour({8, 8, 8});
  no_tumour.at(4, 4, 4) = 1;
  cases.push_back({Volume({8, 8, 8}, 0.1f), no_tumour});
  stage2::UNet3d net(1);
  stage2::SegTrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(stage2::train_segmentation(net, cases, cases, cfg),
                  stage2::DegenerateDatasetError);
}

TEST_CASE("segmentation overfits a single phantom") {
  phantom::PhantomParams pp;
  pp.shape = {24, 32, 32};
  pp.pancreas_radius_range = {8.0, 9.0};
  pp.tumour_radius_range = {3.5, 4.5};
  auto c = phantom::generate_case(pp, 2);

  std::vector<stage2::TrainingCase> cases;
  cases.push_back({c.volume, c.mask});

  stage2::UNet3d net(1);
  stage2::SegTrainConfig cfg;
  cfg.epochs = 14;
  cfg.patches_per_case = 4;
  cfg.patch_shape = {16, 24, 24};
  cfg.seed = 1;
  auto report = stage2::train_segmentation(net, cases, cases, cfg);

  auto pred = net.predict(c.volume);
  std::int64_t agree = 0;
  for (std::size_t i = 0; i < pred.mask.data.size(); ++i)
    agree += pred.mask.data[i] == c.mask.data[i];
  const double voxel_acc = double(agree) / double(c.mask.numel());
  CHECK(voxel_acc >= 0.95);
  CHECK(report.val_dice.at(1) >= 0.80);
}

TEST_CASE("encoder names and shapes line up for transfer") {
  stage2::UNet3d net(5);
  auto ck = net.to_checkpoint(5);
  CHECK(ck.stage == "stage2-seg");
  auto enc = ck.subtree("encoder.");
  CHECK(enc.size() == 10);  // 5 convs, weight + bias each
  CHECK(enc.count("encoder.stem.conv.weight") == 1);
  CHECK(enc.count("encoder.down2.conv2.bias") == 1);

  // round-trip restores every tensor bit-exactly
  const auto path =
      (std::filesystem::temp_directory_path() / "seg_rt.ck").string();
  ck.save(path);
  auto back = nn::Checkpoint::load(path);
  stage2::UNet3d other(99);
  other.from_checkpoint(back);
  auto ck2 = other.to_checkpoint(5);
  for (const auto& [name, t] : ck.tensors)
    REQUIRE(ck2.tensors.at(name).v == t.v);
}

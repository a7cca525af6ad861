#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace pba {
namespace {

const Intrinsics kK{60.0, 60.0, 23.5, 17.5, 0.5};
constexpr int kW = 48, kH = 36;

// Points on selected pixels of `img` at depth 3 in a camera at the origin.
std::vector<ScenePoint> make_points(const GrayImage& img, FrameId ref, const std::vector<Pixel>& pixels) {
  std::vector<ScenePoint> pts;
  for (const Pixel& px : pixels) {
    const double z = 3.0;
    const Vec3 X{(px.x - kK.cx) * z / kK.fx, (px.y - kK.cy) * z / kK.fy, z};
    pts.emplace_back(static_cast<PointId>(pts.size()), X, ref, px.vec(),
                     *extract_patch(img, px.vec(), 1), *extract_patch(img, px.vec(), 2));
  }
  return pts;
}

std::vector<Pixel> interior_grid() {
  std::vector<Pixel> px;
  for (int y = 4; y < kH - 4; y += 5)
    for (int x = 4; x < kW - 4; x += 5) px.push_back({x, y});
  return px;
}

TEST(Visibility, IdenticalFrameAcceptsAll) {
  std::mt19937_64 rng(1);
  const GrayImage img = test::random_image(rng, kW, kH);
  auto pts = make_points(img, 0, interior_grid());
  const auto up = update_visibility(1, img, Pose::identity(), pts, kK);
  EXPECT_EQ(up.accepted, pts.size());
  EXPECT_EQ(up.rejected, 0u);
  for (const auto& p : pts) {
    ASSERT_EQ(p.visibility().size(), 1u);
    EXPECT_EQ(p.visibility()[0], 1);
    const int x = static_cast<int>(p.ref_pixel().x()), y = static_cast<int>(p.ref_pixel().y());
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) EXPECT_FALSE(up.mask.valid(x + dx, y + dy));
  }
}

TEST(Visibility, MaskIsUnionOfAcceptedBlocks) {
  std::mt19937_64 rng(2);
  const GrayImage img = test::random_image(rng, kW, kH);
  auto pts = make_points(img, 0, interior_grid());
  const Pose shift(Mat3::Identity(), Vec3(0.07, -0.03, 0.0));
  const auto up = update_visibility(1, img, shift, pts, kK, {}, 2);
  OccupancyMask expected(kW, kH);
  for (const auto& p : pts)
    if (p.visible_in(1)) mark_occupied(expected, project(shift, kK, p.position)->uv, 2);
  EXPECT_EQ(up.mask, expected);
}

TEST(Visibility, ProjectionOutsideImageIsIgnored) {
  std::mt19937_64 rng(3);
  const GrayImage img = test::random_image(rng, kW, kH);
  auto pts = make_points(img, 0, interior_grid());
  // Shift the camera sideways by more than the field of view.
  const auto up = update_visibility(1, img, Pose(Mat3::Identity(), Vec3(10, 0, 0)), pts, kK);
  EXPECT_EQ(up.accepted, 0u);
  EXPECT_EQ(up.rejected, 0u);
  EXPECT_EQ(up.mask.invalid_count(), 0u);
  // And behind the camera.
  const auto behind = update_visibility(1, img, Pose(Mat3::Identity(), Vec3(0, 0, -5)), pts, kK);
  EXPECT_EQ(behind.accepted + behind.rejected, 0u);
}

TEST(Visibility, InvertedFrameIsRejected) {
  std::mt19937_64 rng(4);
  const GrayImage img = test::random_image(rng, kW, kH);
  GrayImage inv = img;
  for (double& v : inv.data()) v = 1.0 - v;
  auto pts = make_points(img, 0, interior_grid());
  const auto up = update_visibility(1, inv, Pose::identity(), pts, kK);
  EXPECT_EQ(up.accepted, 0u);
  EXPECT_EQ(up.rejected, pts.size());
  EXPECT_EQ(up.mask.invalid_count(), 0u);
  for (const auto& p : pts) EXPECT_TRUE(p.visibility().empty());
}

TEST(Visibility, FrameDistanceWindow) {
  std::mt19937_64 rng(5);
  const GrayImage img = test::random_image(rng, kW, kH);
  for (int f = -4; f <= 9; ++f) {
    auto pts = make_points(img, 3, interior_grid());
    const auto up = update_visibility(f, img, Pose::identity(), pts, kK);
    const bool in_range = f != 3 && std::abs(f - 3) <= 2;
    EXPECT_EQ(up.accepted, in_range ? pts.size() : 0u) << "frame " << f;
    EXPECT_EQ(up.rejected, 0u);
  }
}

TEST(Visibility, NoDuplicateEntries) {
  std::mt19937_64 rng(6);
  const GrayImage img = test::random_image(rng, kW, kH);
  auto pts = make_points(img, 0, interior_grid());
  update_visibility(1, img, Pose::identity(), pts, kK);
  update_visibility(1, img, Pose::identity(), pts, kK);
  update_visibility(2, img, Pose::identity(), pts, kK);
  for (const auto& p : pts) EXPECT_EQ(p.visibility(), (std::vector<FrameId>{1, 2}));
  EXPECT_FALSE(pts[0].add_visibility(0));
  EXPECT_FALSE(pts[0].add_visibility(2));
}

TEST(Visibility, StricterThresholdAcceptsFewer) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.25);
  const GrayImage img = test::random_image(rng, kW, kH);
  GrayImage noisy = img;
  for (double& v : noisy.data()) v += noise(rng);
  std::vector<Pixel> pixels;
  for (int y = 3; y < kH - 3; ++y)
    for (int x = 3; x < kW - 3; ++x) pixels.push_back({x, y});
  std::size_t prev = pixels.size() + 1;
  for (double thr = -0.9; thr < 0.95; thr += 0.1) {
    auto pts = make_points(img, 0, pixels);
    VisibilityConfig cfg;
    cfg.zncc_threshold = thr;
    const auto up = update_visibility(1, noisy, Pose::identity(), pts, kK, cfg);
    EXPECT_EQ(up.accepted + up.rejected, pts.size());
    EXPECT_LE(up.accepted, prev) << thr;
    prev = up.accepted;
  }
  EXPECT_LT(prev, pixels.size());
}

TEST(Visibility, RejectsBadConfig) {
  std::vector<ScenePoint> none;
  VisibilityConfig cfg;
  cfg.zncc_threshold = 1.0;
  EXPECT_THROW(update_visibility(1, GrayImage(8, 8), Pose::identity(), none, kK, cfg), std::invalid_argument);
  cfg = {};
  cfg.max_frame_distance = 0;
  EXPECT_THROW(update_visibility(1, GrayImage(8, 8), Pose::identity(), none, kK, cfg), std::invalid_argument);
}

}  // namespace
}  // namespace pba

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace pba {
namespace {

FrameInput input(const synth::SyntheticSequence& seq, std::size_t i) {
  return {seq.images[i], seq.init[i].inverse(), std::nullopt, std::nullopt, seq.depths[i]};
}

class SmallSequence : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    clean_ = new synth::SyntheticSequence(test::small_sequence(0.0, 2, 9));
    noisy_ = new synth::SyntheticSequence(test::small_sequence(0.01, 2, 9));
  }
  static void TearDownTestSuite() {
    delete clean_;
    delete noisy_;
  }
  static synth::SyntheticSequence* clean_;
  static synth::SyntheticSequence* noisy_;
};
synth::SyntheticSequence* SmallSequence::clean_ = nullptr;
synth::SyntheticSequence* SmallSequence::noisy_ = nullptr;

TEST_F(SmallSequence, FirstFrameSeedsPoints) {
  Pipeline pl(clean_->K);
  const auto& st = pl.process_frame(input(*clean_, 0));
  EXPECT_EQ(st.id, 0);
  EXPECT_EQ(st.visibility_accepted + st.visibility_rejected, 0u);
  EXPECT_GT(st.selected, 100u);
  EXPECT_GT(st.created, 100u);
  EXPECT_LE(st.created, st.selected);
  EXPECT_EQ(pl.window().points.size(), st.created);
  ASSERT_EQ(pl.trajectory().size(), 1u);
  EXPECT_TRUE(pl.windows().empty());
  for (const auto& p : pl.window().points) {
    EXPECT_EQ(p.ref_frame(), 0);
    EXPECT_TRUE(p.visibility().empty());
    EXPECT_EQ(p.ref_patch().radius, pl.config().solver.patch_radius);
  }
}

TEST_F(SmallSequence, DuplicateFrameReusesPoints) {
  Pipeline pl(clean_->K);
  const std::size_t first = pl.process_frame(input(*clean_, 0)).created;
  const auto st = pl.process_frame(input(*clean_, 0));
  EXPECT_EQ(st.visibility_accepted, first);
  EXPECT_EQ(st.visibility_rejected, 0u);
  EXPECT_LT(st.created, first / 10);
}

TEST_F(SmallSequence, InvalidDepthCreatesNothing) {
  Pipeline pl(clean_->K);
  FrameInput in{clean_->images[0], Pose::identity(), clean_->images[0], std::nullopt, std::nullopt};
  // A right image identical to the left has zero disparity everywhere,
  // which is below the triangulation threshold.
  const auto st = pl.process_frame(std::move(in));
  EXPECT_GT(st.selected, 0u);
  EXPECT_EQ(st.created, 0u);
  FrameInput none{clean_->images[1], Pose::identity(), std::nullopt,
                  DisparityMap(clean_->images[1].width(), clean_->images[1].height()), std::nullopt};
  EXPECT_EQ(pl.process_frame(std::move(none)).created, 0u);
  FrameInput nothing{clean_->images[2], Pose::identity(), std::nullopt, std::nullopt, std::nullopt};
  EXPECT_EQ(pl.process_frame(std::move(nothing)).created, 0u);
}

TEST_F(SmallSequence, DisparityInputMatchesDepthInput) {
  Pipeline a(clean_->K), b(clean_->K);
  const auto sa = a.process_frame(input(*clean_, 0));
  const auto sb = b.process_frame({clean_->images[0], clean_->init[0].inverse(), std::nullopt,
                                   synth::disparity_from_depth(clean_->depths[0], clean_->K), std::nullopt});
  ASSERT_EQ(sa.created, sb.created);
  for (std::size_t i = 0; i < sa.created; ++i)
    EXPECT_LT((a.window().points[i].position - b.window().points[i].position).norm(), 1e-9);
}

TEST_F(SmallSequence, StaticSequenceStaysPut) {
  PipelineConfig cfg;
  Pipeline pl(clean_->K, cfg);
  for (int i = 0; i < 5; ++i) pl.push(input(*clean_, 0));
  ASSERT_EQ(pl.windows().size(), 1u);
  const Pose ref = clean_->init[0].inverse();
  for (const auto& p : pl.trajectory()) {
    EXPECT_LT((p.t - ref.t).norm(), 1e-9);
    EXPECT_LT(rotation_error(p, ref), 1e-9);
  }
}

TEST_F(SmallSequence, StrideFourOverNineFrames) {
  Pipeline pl(noisy_->K);
  int optimized = 0;
  for (std::size_t i = 0; i < 9; ++i) optimized += pl.push(input(*noisy_, i)).has_value();
  EXPECT_EQ(optimized, 2);
  ASSERT_EQ(pl.windows().size(), 2u);
  EXPECT_EQ(pl.windows()[0].frames, (std::vector<FrameId>{0, 1, 2, 3, 4}));
  EXPECT_EQ(pl.windows()[1].frames, (std::vector<FrameId>{4, 5, 6, 7, 8}));
  ASSERT_EQ(pl.window().frames.size(), 1u);
  EXPECT_EQ(pl.window().frames[0].id, 8);
  // Only frame 8 is left and it is already refined.
  pl.finish();
  EXPECT_EQ(pl.windows().size(), 2u);
  EXPECT_TRUE(pl.window().points.empty());
}

TEST_F(SmallSequence, FinishOptimizesPartialWindow) {
  Pipeline pl(noisy_->K);
  for (std::size_t i = 0; i < 7; ++i) pl.push(input(*noisy_, i));
  ASSERT_EQ(pl.windows().size(), 1u);
  pl.finish();
  ASSERT_EQ(pl.windows().size(), 2u);
  EXPECT_EQ(pl.windows()[1].frames, (std::vector<FrameId>{4, 5, 6}));
}

TEST_F(SmallSequence, RefinementReducesPoseError) {
  Pipeline pl(noisy_->K);
  for (std::size_t i = 0; i < 9; ++i) pl.push(input(*noisy_, i));
  pl.finish();
  double before = 0, after = 0, rot_before = 0, rot_after = 0;
  for (std::size_t i = 1; i < 9; ++i) {
    const Pose est = pl.trajectory()[i].inverse();
    before += (noisy_->init[i].t - noisy_->gt[i].t).norm();
    after += (est.t - noisy_->gt[i].t).norm();
    rot_before += rotation_error(noisy_->init[i], noisy_->gt[i]);
    rot_after += rotation_error(est, noisy_->gt[i]);
  }
  EXPECT_LT(after, 0.5 * before);
  EXPECT_LT(rot_after, 0.5 * rot_before);
}

TEST_F(SmallSequence, GaugeAndDeterminism) {
  auto run = [&] {
    Pipeline pl(noisy_->K);
    for (std::size_t i = 0; i < 9; ++i) pl.push(input(*noisy_, i));
    pl.finish();
    return pl;
  };
  const Pipeline a = run(), b = run();
  const Pose first = noisy_->init[0].inverse();
  EXPECT_EQ(a.trajectory()[0].R, first.R);
  EXPECT_EQ(a.trajectory()[0].t, first.t);
  ASSERT_EQ(a.trajectory().size(), b.trajectory().size());
  for (std::size_t i = 0; i < a.trajectory().size(); ++i) {
    EXPECT_EQ(a.trajectory()[i].R, b.trajectory()[i].R);
    EXPECT_EQ(a.trajectory()[i].t, b.trajectory()[i].t);
  }
  ASSERT_EQ(a.retired_points().size(), b.retired_points().size());
  for (std::size_t i = 0; i < a.retired_points().size(); ++i)
    EXPECT_EQ(a.retired_points()[i].position, b.retired_points()[i].position);
}

TEST_F(SmallSequence, EveryCreatedPointIsRetiredOnce) {
  Pipeline pl(noisy_->K);
  for (std::size_t i = 0; i < 9; ++i) pl.push(input(*noisy_, i));
  pl.finish();
  std::size_t created = 0;
  for (const auto& st : pl.frame_stats()) created += st.created;
  EXPECT_EQ(pl.retired_points().size(), created);
  std::vector<PointId> ids;
  for (const auto& p : pl.retired_points()) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
}

TEST_F(SmallSequence, BackwardVisibilityLinksEarlierFrames) {
  PipelineConfig on, off;
  off.backward_visibility = false;
  Pipeline a(clean_->K, on), b(clean_->K, off);
  for (std::size_t i = 0; i < 3; ++i) {
    a.process_frame(input(*clean_, i));
    b.process_frame(input(*clean_, i));
  }
  EXPECT_GT(a.frame_stats()[1].backward_accepted, 0u);
  EXPECT_EQ(b.frame_stats()[1].backward_accepted, 0u);
  for (const auto& p : a.window().points)
    for (FrameId f : p.visibility()) EXPECT_LE(std::abs(f - p.ref_frame()), 2);
  bool earlier = false;
  for (const auto& p : a.window().points)
    for (FrameId f : p.visibility()) earlier = earlier || f < p.ref_frame();
  EXPECT_TRUE(earlier);
}

TEST_F(SmallSequence, CallOrderIsEnforced) {
  PipelineConfig cfg;
  cfg.window_size = 2;
  cfg.window_stride = 1;
  Pipeline pl(clean_->K, cfg);
  EXPECT_THROW(pl.slide_and_optimize(), std::logic_error);
  pl.process_frame(input(*clean_, 0));
  pl.process_frame(input(*clean_, 1));
  EXPECT_THROW(pl.process_frame(input(*clean_, 2)), std::logic_error);
  pl.slide_and_optimize();
  EXPECT_NO_THROW(pl.process_frame(input(*clean_, 2)));
}

TEST(PipelineConfig, Validation) {
  const Intrinsics K{100, 100, 50, 50, 0.5};
  PipelineConfig cfg;
  cfg.window_stride = 5;
  EXPECT_THROW(Pipeline(K, cfg), std::invalid_argument);
  cfg = {};
  cfg.window_size = 1;
  EXPECT_THROW(Pipeline(K, cfg), std::invalid_argument);
  cfg = {};
  cfg.solver.patch_radius = 3;
  EXPECT_THROW(Pipeline(K, cfg), std::invalid_argument);
  cfg = {};
  cfg.selection.border = 0;
  EXPECT_EQ(Pipeline(K, cfg).config().selection.border, cfg.visibility.zncc_patch_radius);
}

}  // namespace
}  // namespace pba

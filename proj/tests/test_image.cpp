#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

namespace pba {
namespace {

TEST(Raster, RejectsMismatchedData) {
  EXPECT_THROW(GrayImage(3, 3, std::vector<double>(8)), std::invalid_argument);
  EXPECT_NO_THROW(GrayImage(3, 3, std::vector<double>(9)));
}

TEST(Bilinear, IntegerCoordinatesReadPixels) {
  std::mt19937_64 rng(1);
  const GrayImage img = test::random_image(rng, 7, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) EXPECT_EQ(*sample_bilinear(img, x, y), img(x, y));
}

TEST(Bilinear, MidpointOfFourPixels) {
  GrayImage img(2, 2);
  img(0, 0) = 0;
  img(1, 0) = 0;
  img(0, 1) = 1;
  img(1, 1) = 1;
  EXPECT_DOUBLE_EQ(*sample_bilinear(img, 0.5, 0.5), 0.5);
}

TEST(Bilinear, ReproducesRamp) {
  const int w = 20, h = 10;
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(x, y) = static_cast<double>(x) / w;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(0.0, w - 1), uy(0.0, h - 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = ux(rng), y = uy(rng);
    EXPECT_NEAR(*sample_bilinear(img, x, y), x / w, 1e-12);
  }
}

TEST(Bilinear, ExactOnBilinearFunctions) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto f = test::random_bilinear_field(rng, 16, 12);
    const GrayImage img = test::render_field(f, 16, 12);
    std::uniform_real_distribution<double> ux(0.0, 15.0), uy(0.0, 11.0);
    for (int i = 0; i < 100; ++i) {
      const double x = ux(rng), y = uy(rng);
      EXPECT_NEAR(*sample_bilinear(img, x, y), f(x, y), 1e-12);
    }
    // The last row and column are inside the domain too.
    EXPECT_NEAR(*sample_bilinear(img, 15.0, 11.0), f(15, 11), 1e-12);
    EXPECT_NEAR(*sample_bilinear(img, 15.0, 3.5), f(15, 3.5), 1e-12);
  }
}

TEST(Bilinear, OutOfBoundsIsSignalled) {
  const GrayImage img(5, 4, 0.5);
  EXPECT_FALSE(sample_bilinear(img, -0.01, 1.0));
  EXPECT_FALSE(sample_bilinear(img, 1.0, -1e-9));
  EXPECT_FALSE(sample_bilinear(img, 4.0001, 1.0));
  EXPECT_FALSE(sample_bilinear(img, 1.0, 3.5));
  EXPECT_TRUE(sample_bilinear(img, 4.0, 3.0));
}

TEST(Gradients, ConstantImageIsFlat) {
  const auto g = gradients(GrayImage(8, 6, 0.3));
  for (double v : g.gx.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.gy.data()) EXPECT_EQ(v, 0.0);
}

TEST(Gradients, RampHasConstantSlope) {
  const int w = 16, h = 9;
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(x, y) = static_cast<double>(x) / w;
  const auto g = gradients(img);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      EXPECT_NEAR(g.gx(x, y), 1.0 / w, 1e-15);
      EXPECT_EQ(g.gy(x, y), 0.0);
    }
  }
}

TEST(Gradients, MatchBruteForceConvolution) {
  std::mt19937_64 rng(4);
  const GrayImage img = test::random_image(rng, 16, 16);
  const auto g = gradients(img);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      double ex, ey;
      if (x == 0) ex = img(1, y) - img(0, y);
      else if (x == 15) ex = img(15, y) - img(14, y);
      else ex = 0.5 * (img(x + 1, y) - img(x - 1, y));
      if (y == 0) ey = img(x, 1) - img(x, 0);
      else if (y == 15) ey = img(x, 15) - img(x, 14);
      else ey = 0.5 * (img(x, y + 1) - img(x, y - 1));
      EXPECT_EQ(g.gx(x, y), ex);
      EXPECT_EQ(g.gy(x, y), ey);
    }
  }
}

TEST(Gradients, SinusoidWithinTruncationBound) {
  const double a = 0.3, b = 0.2;
  GrayImage img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) img(x, y) = std::sin(a * x) * std::cos(b * y);
  const auto g = gradients(img);
  const double bound = a * a / 6 + b * b / 6;
  for (int y = 1; y < 63; ++y) {
    for (int x = 1; x < 63; ++x) {
      EXPECT_LT(std::abs(g.gx(x, y) - a * std::cos(a * x) * std::cos(b * y)), bound);
      EXPECT_LT(std::abs(g.gy(x, y) + b * std::sin(a * x) * std::sin(b * y)), bound);
    }
  }
}

TEST(Gradients, RejectTinyImages) {
  EXPECT_THROW(gradients(GrayImage(2, 5)), std::invalid_argument);
  EXPECT_THROW(gradients(GrayImage(5, 2)), std::invalid_argument);
  EXPECT_NO_THROW(gradients(GrayImage(3, 3)));
}

TEST(GradientMagnitude, ConstantAndRamp) {
  const auto flat = gradient_magnitude(GrayImage(6, 6, 0.7));
  for (double v : flat.data()) EXPECT_EQ(v, 0.0);
  GrayImage ramp(10, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 10; ++x) ramp(x, y) = 0.05 * x;
  const auto m = gradient_magnitude(ramp);
  for (int y = 1; y < 4; ++y)
    for (int x = 1; x < 9; ++x) EXPECT_NEAR(m(x, y), 0.05, 1e-15);
}

TEST(GradientMagnitude, IsHypotOfGradients) {
  std::mt19937_64 rng(5);
  const GrayImage img = test::random_image(rng, 13, 11);
  const auto g = gradients(img);
  const auto m = gradient_magnitude(img);
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 13; ++x) EXPECT_EQ(m(x, y), std::hypot(g.gx(x, y), g.gy(x, y)));
}

TEST(ExtractPatch, IntegerCenterReadsBlock) {
  std::mt19937_64 rng(6);
  const GrayImage img = test::random_image(rng, 9, 9);
  for (int r : {1, 2}) {
    const auto p = extract_patch(img, Vec2(4, 5), r);
    ASSERT_TRUE(p);
    ASSERT_EQ(p->dim(), static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
    std::size_t k = 0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) EXPECT_EQ(p->values[k++], img(4 + dx, 5 + dy));
  }
}

TEST(ExtractPatch, ConstantImageGivesConstantPatch) {
  const auto p = extract_patch(GrayImage(8, 8, 0.25), Vec2(3.3, 4.7), 2);
  ASSERT_TRUE(p);
  for (double v : p->values) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ExtractPatch, MatchesIndependentSamples) {
  std::mt19937_64 rng(7);
  const GrayImage img = test::random_image(rng, 12, 12);
  std::uniform_real_distribution<double> u(2.0, 9.0);
  for (int t = 0; t < 50; ++t) {
    const Vec2 c{u(rng), u(rng)};
    const auto p = extract_patch(img, c, 1);
    ASSERT_TRUE(p);
    std::size_t k = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        EXPECT_EQ(p->values[k++], *sample_bilinear(img, c.x() + dx, c.y() + dy));
  }
}

TEST(ExtractPatch, FootprintOutsideIsInvalid) {
  const GrayImage img(10, 10, 0.5);
  EXPECT_FALSE(extract_patch(img, Vec2(0.5, 5), 1));
  EXPECT_FALSE(extract_patch(img, Vec2(5, 8.2), 1));
  EXPECT_TRUE(extract_patch(img, Vec2(1, 8), 1));
}

Patch random_patch(std::mt19937_64& rng, int r) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Patch p;
  p.radius = r;
  p.values.resize(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
  for (double& v : p.values) v = u(rng);
  return p;
}

TEST(Zncc, SelfAffineAndInverted) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const Patch p = random_patch(rng, t % 2 + 1);
    Patch affine = p, inverted = p;
    for (double& v : affine.values) v = 0.4 * v + 0.3;
    for (double& v : inverted.values) v = 1.0 - v;
    EXPECT_NEAR(zncc(p, p), 1.0, 1e-12);
    EXPECT_NEAR(zncc(p, affine), 1.0, 1e-12);
    EXPECT_NEAR(zncc(p, inverted), -1.0, 1e-12);
  }
}

TEST(Zncc, SymmetricAndAffineInvariant) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ua(0.1, 3.0), ub(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const Patch a = random_patch(rng, 2), b = random_patch(rng, 2);
    EXPECT_NEAR(zncc(a, b), zncc(b, a), 1e-12);
    Patch b2 = b;
    const double alpha = ua(rng), beta = ub(rng);
    for (double& v : b2.values) v = alpha * v + beta;
    EXPECT_NEAR(zncc(a, b2), zncc(a, b), 1e-12);
    const double s = zncc(a, b);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Zncc, ConstantPatchScoresZero) {
  std::mt19937_64 rng(10);
  const Patch p = random_patch(rng, 1);
  Patch c;
  c.radius = 1;
  c.values.assign(9, 0.42);
  EXPECT_EQ(zncc(p, c), 0.0);
  EXPECT_EQ(zncc(c, p), 0.0);
  EXPECT_EQ(zncc(c, c), 0.0);
}

TEST(Zncc, DimensionMismatchThrows) {
  std::mt19937_64 rng(11);
  EXPECT_THROW(zncc(random_patch(rng, 1), random_patch(rng, 2)), std::invalid_argument);
}

}  // namespace
}  // namespace pba

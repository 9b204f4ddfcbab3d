#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gridfuse/estimation.hpp"

using namespace gridfuse;

namespace {

GridSpec square(int n, double cell) { return GridSpec::planar({-1.0, 2.0, 1.5}, cell, n, n); }

LikelihoodField gaussian_blob(const GridSpec& g, const Vec3& mean, double sigma) {
  std::vector<double> raw(g.cell_count());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Vec3 d = g.position(GridIndex{i}) - mean;
    raw[i] = std::exp(-0.5 * (d.x * d.x + d.y * d.y) / (sigma * sigma));
  }
  return normalize(LikelihoodField(g, raw));
}

}  // namespace

TEST(MapEstimate, PointMass) {
  const GridSpec g = square(10, 0.5);
  std::vector<double> raw(g.cell_count(), 0.0);
  raw[17] = 1.0;
  EXPECT_EQ(map_estimate(LikelihoodField(g, raw)).value, 17u);
}

TEST(MapEstimate, UniformTieGoesToLowestIndex) {
  EXPECT_EQ(map_estimate(init_uniform(square(10, 0.5))).value, 0u);
}

TEST(MapEstimate, MatchesExhaustiveScan) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GridSpec g = square(17, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> raw(g.cell_count());
    for (double& v : raw) v = std::round(u(rng) * 20.0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] > raw[best]) best = i;
    }
    EXPECT_EQ(map_estimate(normalize(LikelihoodField(g, raw))).value, best);
  }
}

TEST(MapEstimate, AllZeroIsDegenerate) {
  const GridSpec g = square(4, 1.0);
  EXPECT_THROW(map_estimate(LikelihoodField(g, std::vector<double>(16, 0.0))), DegenerateField);
}

TEST(WeightedMean, PointMassIsExact) {
  const GridSpec g = square(10, 0.5);
  std::vector<double> raw(g.cell_count(), 0.0);
  raw[g.index({3, 7, 0}).value] = 1.0;
  const auto wm = weighted_mean(LikelihoodField(g, raw), g.index({3, 7, 0}), 1.0);
  EXPECT_EQ(wm.position, g.position(CellCoords{3, 7, 0}));
  EXPECT_EQ(wm.support_count, 13);  // lattice points within two cells
}

TEST(WeightedMean, SymmetricBlobBetweenCells) {
  const GridSpec g = square(40, 0.25);
  const Vec3 centre = g.position(CellCoords{20, 20, 0}) + Vec3{0.125, 0.125, 0.0};
  const auto f = gaussian_blob(g, centre, 0.4);
  const auto wm = weighted_mean(f, map_estimate(f), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(wm.position.x, centre.x, 1e-9);
  EXPECT_NEAR(wm.position.y, centre.y, 1e-9);
  EXPECT_NEAR(wm.position.z, 1.5, 1e-12);
}

TEST(WeightedMean, MatchesIndependentLoop) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GridSpec g = square(25, 0.2);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> raw(g.cell_count());
    for (double& v : raw) v = u(rng);
    const auto f = normalize(LikelihoodField(g, raw));
    const GridIndex centre = map_estimate(f);
    const double r = 3.0 * g.cell_size;
    const Vec3 c = g.position(centre);
    double sw = 0.0, sx = 0.0, sy = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      const Vec3 p = g.position(GridIndex{i});
      if (std::hypot(p.x - c.x, p.y - c.y) > r + 1e-12) continue;
      sw += f[i];
      sx += f[i] * p.x;
      sy += f[i] * p.y;
      ++count;
    }
    const auto wm = weighted_mean(f, centre, r);
    EXPECT_EQ(wm.support_count, count);
    EXPECT_NEAR(wm.position.x, sx / sw, 1e-12);
    EXPECT_NEAR(wm.position.y, sy / sw, 1e-12);
  }
}

TEST(Estimate, UnimodalWithinHalfCell) {
  const GridSpec g = square(40, 0.25);
  const Vec3 mode = g.position(CellCoords{13, 22, 0}) + Vec3{0.05, -0.08, 0.0};
  const auto e = estimate(gaussian_blob(g, mode, 0.5), 1.25, 3.0);
  EXPECT_LT(norm(e.position - mode), 0.125);
  EXPECT_EQ(e.timestamp, 3.0);
  EXPECT_GE(e.support_count, 1);
}

TEST(Estimate, BimodalStaysOnHeavierMode) {
  const GridSpec g = square(60, 0.25);
  const Vec3 heavy = g.position(CellCoords{15, 30, 0});
  const Vec3 light = g.position(CellCoords{45, 30, 0});
  const auto a = gaussian_blob(g, heavy, 0.5);
  const auto b = gaussian_blob(g, light, 0.5);
  std::vector<double> raw(g.cell_count());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = 0.7 * a[i] + 0.3 * b[i];
  const auto f = normalize(LikelihoodField(g, raw));
  const auto e = estimate(f, 2.0);
  EXPECT_LT(norm(e.position - heavy), 0.01);
  const auto global = estimate(f, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(global.position.x, 0.7 * heavy.x + 0.3 * light.x, 1e-9);
  EXPECT_EQ(global.support_count, static_cast<int>(g.cell_count()));
}

TEST(Estimate, SubCellRefinement) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GridSpec g = square(40, 0.25);
  int better = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 mean = g.position(CellCoords{15, 15, 0}) + Vec3{2.5 * u(rng), 2.5 * u(rng), 0.0};
    const auto f = gaussian_blob(g, mean, 0.6);
    const auto e = estimate(f, 5.0 * g.cell_size);
    const double wm_err = norm(e.position - mean);
    const double map_err = norm(g.position(e.map_cell) - mean);
    if (wm_err <= map_err) ++better;
  }
  EXPECT_GE(better, 80);
}

TEST(Estimate, ScaleInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GridSpec g = square(20, 0.5);
  std::vector<double> raw(g.cell_count());
  for (double& v : raw) v = u(rng);
  std::vector<double> scaled = raw;
  for (double& v : scaled) v *= 1234.5;
  const auto a = estimate(LikelihoodField(g, raw), 1.5);
  const auto b = estimate(LikelihoodField(g, scaled), 1.5);
  EXPECT_EQ(a.map_cell, b.map_cell);
  EXPECT_NEAR(a.position.x, b.position.x, 1e-12);
  EXPECT_NEAR(a.position.y, b.position.y, 1e-12);
}

TEST(Estimate, SupportWithinRadius) {
  const GridSpec g = square(30, 0.2);
  const auto f = gaussian_blob(g, g.position(CellCoords{10, 12, 0}), 1.0);
  const auto e = estimate(f, 0.7);
  // Lattice points with (dx^2 + dy^2) <= 12.25 cells^2.
  int expected = 0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) expected += (dx * dx + dy * dy) * 0.04 <= 0.49 + 1e-12;
  }
  EXPECT_EQ(e.support_count, expected);
}

TEST(CovarianceTrace, PointMassIsZero) {
  const GridSpec g = square(5, 1.0);
  std::vector<double> raw(g.cell_count(), 0.0);
  raw[7] = 1.0;
  EXPECT_DOUBLE_EQ(covariance_trace(LikelihoodField(g, raw)), 0.0);
}

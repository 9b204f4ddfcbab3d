#include <gtest/gtest.h>

#include <random>

#include "gridfuse/estimation.hpp"
#include "gridfuse/measurement_update.hpp"
#include "oracle.hpp"

using namespace gridfuse;

namespace {

GridSpec square(int n, double cell, double height = 0.0) {
  return GridSpec::planar({-0.5 * (n - 1) * cell, -0.5 * (n - 1) * cell, height}, cell, n, n);
}

double entropy(const LikelihoodField& f) {
  double h = 0.0;
  for (double p : f.mass()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

GmmModel residual_gmm() {
  return make_gmm({{0.42, 0.25, 13.06}, {0.24, 13.09, 20.37}, {0.24, -12.61, 21.05}, {0.01, -0.3, 142.89}},
                  true);
}

SatelliteObservation satellite(const std::string& id, double az, double el, const Vec3& truth,
                               Visibility vis = Visibility::kLos, double error = 0.0) {
  const double r = 2.2e7;
  const Vec3 pos{r * std::cos(el) * std::cos(az), r * std::cos(el) * std::sin(az), r * std::sin(el)};
  return {id, pos, norm(pos - truth) + error, vis};
}

}  // namespace

TEST(RangeUpdate, NoiselessMapAtTruth) {
  const GridSpec g = square(41, 0.2);
  const AnchorMap anchors{{"A", {"A", {-10.0, 3.0, 0.0}, ReferenceKind::kAnchor}},
                          {"B", {"B", {8.0, 9.0, 0.0}, ReferenceKind::kAnchor}},
                          {"C", {"C", {2.0, -12.0, 0.0}, ReferenceKind::kAnchor}}};
  const Vec3 truth = g.position(CellCoords{27, 13, 0});
  const NoiseModel model = GaussianModel{0.0, 0.05};
  LikelihoodField f = init_uniform(g);
  for (const auto& [id, a] : anchors) f = update_range(f, {id, norm(a.position - truth)}, anchors, model);
  EXPECT_EQ(map_estimate(f).value, g.nearest(truth).value);
  EXPECT_NEAR(f.total(), 1.0, 1e-9);
}

TEST(RangeUpdate, FarOutlierLeavesPriorArgmax) {
  const GridSpec g = square(21, 0.5);
  std::vector<double> prior(g.cell_count(), 1.0);
  prior[123] = 3.0;
  const auto field = normalize(LikelihoodField(g, prior));
  const AnchorMap anchors{{"A", {"A", {0.0, 0.0, 0.0}, ReferenceKind::kAnchor}}};
  // Every cell is within 8 m of the anchor; 100 sigma below that is still inside the outlier support.
  const NoiseModel model = make_mixture(0.9, GaussianModel{0.0, 0.01}, UniformModel{-30.0, 30.0});
  const auto post = update_range(field, {"A", 0.0 - 1.0}, anchors, model);
  EXPECT_EQ(map_estimate(post).value, 123u);
  for (std::size_t i = 0; i < g.cell_count(); ++i) EXPECT_NEAR(post[i], field[i], 1e-12);
}

TEST(RangeUpdate, DefaultUwbModelRing) {
  const GridSpec g = square(101, 0.1);
  const Vec3 anchor{0.0, 0.0, 0.0};
  const AnchorMap anchors{{"A", {"A", anchor, ReferenceKind::kAnchor}}};
  const NoiseModel model = make_mixture(0.9, GaussianModel{0.05, 0.31}, UniformModel{-30.0, 30.0});
  const double z = 3.05;
  const auto post = update_range(init_uniform(g), {"A", z}, anchors, model);
  const auto expected = oracle::posterior(std::vector<double>(g.cell_count(), 1.0 / g.cell_count()),
                                          {oracle::range_lik(g, anchor, z, model)}, true);
  EXPECT_LT(oracle::max_relative_error(post.mass(), expected), 1e-12);
  // Peak mass sits on the 3 m ring; mass within one sigma of the ring dominates.
  const double peak = post[map_estimate(post).value];
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const double d = norm(g.position(GridIndex{i}) - anchor);
    if (std::abs(d - 3.0) > 1.0) {
      EXPECT_LT(post[i], 0.01 * peak);
    }
  }
  EXPECT_NEAR(norm(g.position(map_estimate(post)) - anchor), 3.0, 0.1);
}

TEST(TdoaUpdate, RidgeOnBisector) {
  const GridSpec g = square(21, 0.5);
  const AnchorMap anchors{{"A", {"A", {-4.0, 0.0, 0.0}, ReferenceKind::kAnchor}},
                          {"B", {"B", {4.0, 0.0, 0.0}, ReferenceKind::kAnchor}}};
  const auto post = update_tdoa(init_uniform(g), {"A", "B", 0.0}, anchors, GaussianModel{0.0, 0.1});
  const double peak = post[map_estimate(post).value];
  for (int y = 0; y < 21; ++y) EXPECT_NEAR(post[g.index({10, y, 0}).value], peak, 1e-12);
}

TEST(TdoaUpdate, SwapAndNegateIsIdentical) {
  const GridSpec g = square(15, 0.4);
  const AnchorMap anchors{{"A", {"A", {-3.0, 1.0, 0.0}, ReferenceKind::kAnchor}},
                          {"B", {"B", {2.0, 4.0, 1.0}, ReferenceKind::kAnchor}}};
  const NoiseModel m = GaussianModel{0.0, 0.3};
  const auto ab = update_tdoa(init_uniform(g), {"A", "B", 1.2}, anchors, m);
  const auto ba = update_tdoa(init_uniform(g), {"B", "A", -1.2}, anchors, m);
  for (std::size_t i = 0; i < g.cell_count(); ++i) EXPECT_NEAR(ab[i], ba[i], 1e-15);
}

TEST(TdoaUpdate, BeyondBaselinePeaksAtMinimalInnovation) {
  const GridSpec g = square(21, 0.5);
  const Vec3 a{-2.0, 0.0, 0.0}, b{2.0, 0.0, 0.0};
  const AnchorMap anchors{{"A", {"A", a, ReferenceKind::kAnchor}}, {"B", {"B", b, ReferenceKind::kAnchor}}};
  const auto post = update_tdoa(init_uniform(g), {"A", "B", 6.0}, anchors, GaussianModel{0.0, 1.0});
  double best = 1e9;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const Vec3 p = g.position(GridIndex{i});
    best = std::min(best, std::abs(6.0 - (norm(a - p) - norm(b - p))));
  }
  const Vec3 m = g.position(map_estimate(post));
  EXPECT_NEAR(std::abs(6.0 - (norm(a - m) - norm(b - m))), best, 1e-12);
}

TEST(AoaUpdate, RayTowardsObservedBearing) {
  const GridSpec g = square(21, 0.5);
  const Vec3 anchor{0.0, 0.0, 0.0};
  const AnchorMap anchors{{"A", {"A", anchor, ReferenceKind::kAnchor}}};
  // Bearing from the receiver to the anchor; receivers on the ray south-west of the anchor see it at +45 deg.
  const auto post = update_aoa(init_uniform(g), {"A", M_PI / 4.0}, anchors, GaussianModel{0.0, 0.02});
  const double peak = post[map_estimate(post).value];
  for (int k = 1; k <= 10; ++k) {
    EXPECT_NEAR(post[g.index({10 - k, 10 - k, 0}).value], peak, 1e-12 * peak);
  }
  EXPECT_LT(post[g.index({10 + 5, 10 + 5, 0}).value], 1e-6 * peak);
}

TEST(AoaUpdate, WrapInvariance) {
  const GridSpec g = square(15, 0.5);
  const AnchorMap anchors{{"A", {"A", {1.0, 2.0, 0.0}, ReferenceKind::kAnchor}}};
  const NoiseModel m = GaussianModel{0.0, 0.1};
  const auto f1 = update_aoa(init_uniform(g), {"A", 2.5}, anchors, m);
  const auto f2 = update_aoa(init_uniform(g), {"A", 2.5 + 2.0 * M_PI}, anchors, m);
  for (std::size_t i = 0; i < g.cell_count(); ++i) EXPECT_NEAR(f1[i], f2[i], 1e-12 * f1[i] + 1e-300);
}

TEST(AoaUpdate, MatchesScalarOracle) {
  const GridSpec g = square(20, 0.3);
  const Vec3 anchor{0.15, -0.45, 0.0};
  const AnchorMap anchors{{"A", {"A", anchor, ReferenceKind::kAnchor}}};
  const NoiseModel m = GaussianModel{0.0, 0.1};
  const auto post = update_aoa(init_uniform(g), {"A", -2.0}, anchors, m);
  const auto expected = oracle::posterior(std::vector<double>(g.cell_count(), 1.0 / g.cell_count()),
                                          {oracle::aoa_lik(g, anchor, -2.0, m)}, true);
  EXPECT_LT(oracle::max_relative_error(post.mass(), expected), 1e-12);
}

TEST(GnssUpdate, TwoSatellitesRidgeThroughTruth) {
  const GridSpec g = square(41, 0.5, 1.5);
  const Vec3 truth = g.position(CellCoords{12, 30, 0});
  GnssPseudoranges obs{{satellite("G1", 0.3, 0.8, truth), satellite("G2", 2.5, 0.5, truth)}};
  const auto up = update_gnss_bssd(init_uniform(g), obs, GnssCaseModels::gaussian(0.05));
  ASSERT_TRUE(up.updated);
  EXPECT_EQ(up.pairs_used, 2);
  const double peak = up.posterior[map_estimate(up.posterior).value];
  EXPECT_GT(up.posterior[g.nearest(truth).value], 0.5 * peak);
}

TEST(GnssUpdate, PairInnovationsAreMirrored) {
  const GridSpec g = square(11, 1.0);
  const Vec3 truth{0.0, 0.0, 0.0};
  const auto a = satellite("A", 0.3, 0.8, truth, Visibility::kLos, 4.0);
  const auto b = satellite("B", 2.0, 0.4, truth, Visibility::kLos, -2.0);
  const auto ab = bssd_innovations(g, a, b);
  const auto ba = bssd_innovations(g, b, a);
  for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_EQ(ab[i], -ba[i]);
}

TEST(GnssUpdate, CaseRouting) {
  const GnssCaseModels models = GnssCaseModels::from_gmm(residual_gmm());
  auto mean_of = [](const std::optional<NoiseModel>& m) { return std::get<GaussianModel>(*m).mean; };
  EXPECT_DOUBLE_EQ(mean_of(select_case_model(models, Visibility::kLos, Visibility::kLos)), 0.25);
  EXPECT_DOUBLE_EQ(mean_of(select_case_model(models, Visibility::kNlos, Visibility::kLos)), 13.09);
  EXPECT_DOUBLE_EQ(mean_of(select_case_model(models, Visibility::kLos, Visibility::kNlos)), -12.61);
  EXPECT_FALSE(select_case_model(models, Visibility::kNlos, Visibility::kNlos).has_value());
  EXPECT_NEAR(std::get<GaussianModel>(models.nlos_los).stddev, std::sqrt(20.37), 1e-15);
}

TEST(GnssUpdate, NlosPairContributesNothing) {
  const GridSpec g = square(21, 1.0, 1.5);
  const Vec3 truth{2.0, -1.0, 1.5};
  const GnssCaseModels models = GnssCaseModels::from_gmm(residual_gmm());
  GnssPseudoranges los{{satellite("G1", 0.1, 0.9, truth), satellite("G2", 1.9, 0.6, truth, Visibility::kLos, 3.0),
                        satellite("G3", 4.0, 0.4, truth, Visibility::kNlos, 15.0)}};
  GnssPseudoranges with_nlos = los;
  with_nlos.satellites.push_back(satellite("G4", 5.0, 0.7, truth, Visibility::kNlos, 9.0));
  // G3-G4 is NLOS-NLOS; compare against the explicit pair list minus that pair, in product mode.
  const auto full = update_gnss_bssd(init_uniform(g), with_nlos, models, CombineMode::kProduct);
  EXPECT_EQ(full.pairs_used, 10);
  const auto pairs = oracle::bssd_liks(g, with_nlos, models);
  EXPECT_EQ(pairs.size(), 10u);
  const auto expected =
      oracle::posterior(std::vector<double>(g.cell_count(), 1.0 / g.cell_count()), pairs, false);
  EXPECT_LT(oracle::max_relative_error(full.posterior.mass(), expected), 1e-12);
}

TEST(GnssUpdate, AllNlosOrSingleSatelliteIsNoUpdate) {
  const GridSpec g = square(11, 1.0);
  const Vec3 truth{};
  const auto prior = init_uniform(g);
  const GnssCaseModels models = GnssCaseModels::gaussian(7.8);
  EXPECT_FALSE(update_gnss_bssd(prior, {{satellite("G1", 0.1, 0.9, truth)}}, models).updated);
  const GnssPseudoranges nlos{{satellite("G1", 0.1, 0.9, truth, Visibility::kNlos),
                               satellite("G2", 2.1, 0.5, truth, Visibility::kNlos)}};
  const auto up = update_gnss_bssd(prior, nlos, models);
  EXPECT_FALSE(up.updated);
  for (std::size_t i = 0; i < g.cell_count(); ++i) EXPECT_EQ(up.posterior[i], prior[i]);
}

// Holds for the product of pair likelihoods. Summed ridges through one point
// keep roughly the spread of a single ridge, so sum mode is not covered.
TEST(GnssUpdate, MoreSatellitesShrinkCovarianceInProductMode) {
  const GridSpec g = square(61, 1.0, 1.5);
  const GnssCaseModels models = GnssCaseModels::gaussian(7.8);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 7.8);
  double trace2 = 0.0, trace4 = 0.0;
  const Vec3 truth{0.0, 0.0, 1.5};
  const double az[] = {0.2, 1.9, 3.4, 4.9}, el[] = {0.9, 0.5, 0.7, 0.4};
  for (int epoch = 0; epoch < 100; ++epoch) {
    GnssPseudoranges four;
    for (int s = 0; s < 4; ++s) {
      four.satellites.push_back(satellite("S" + std::to_string(s), az[s], el[s], truth, Visibility::kLos, noise(rng)));
    }
    GnssPseudoranges two{{four.satellites[0], four.satellites[1]}};
    trace2 += covariance_trace(update_gnss_bssd(init_uniform(g), two, models, CombineMode::kProduct).posterior);
    trace4 += covariance_trace(update_gnss_bssd(init_uniform(g), four, models, CombineMode::kProduct).posterior);
  }
  EXPECT_LT(trace4, trace2);
}

TEST(Combine, SingleObservationModesAgree) {
  const GridSpec g = square(10, 1.0);
  std::vector<double> lik(g.cell_count());
  for (std::size_t i = 0; i < lik.size(); ++i) lik[i] = 1.0 + static_cast<double>((i * 37) % 11);
  const auto prior = init_uniform(g);
  const CellLikelihood one[] = {lik};
  const auto s = combine(prior, one, CombineMode::kSum);
  const auto p = combine(prior, one, CombineMode::kProduct);
  for (std::size_t i = 0; i < g.cell_count(); ++i) EXPECT_NEAR(s[i], p[i], 1e-15);
}

TEST(Combine, DuplicateObservationSumVsProduct) {
  const GridSpec g = square(10, 1.0);
  std::vector<double> lik(g.cell_count());
  for (std::size_t i = 0; i < lik.size(); ++i) lik[i] = 0.5 + static_cast<double>((i * 13) % 7);
  const auto prior = init_uniform(g);
  const CellLikelihood one[] = {lik};
  const CellLikelihood two[] = {lik, lik};
  const auto single = combine(prior, one, CombineMode::kSum);
  const auto sum = combine(prior, two, CombineMode::kSum);
  const auto product = combine(prior, two, CombineMode::kProduct);
  for (std::size_t i = 0; i < g.cell_count(); ++i) EXPECT_NEAR(sum[i], single[i], 1e-15);
  EXPECT_LT(entropy(product), entropy(sum));
}

TEST(Combine, AllZeroProductIsDegenerate) {
  const GridSpec g = square(4, 1.0);
  const CellLikelihood zero[] = {CellLikelihood(g.cell_count(), 0.0)};
  EXPECT_THROW(combine(init_uniform(g), zero, CombineMode::kProduct), DegenerateField);
  EXPECT_THROW(combine(init_uniform(g), zero, CombineMode::kSum), DegenerateField);
}

TEST(Combine, LongProductsDoNotUnderflow) {
  const GridSpec g = square(4, 1.0);
  std::vector<CellLikelihood> liks(400, CellLikelihood(g.cell_count(), 1e-3));
  for (auto& l : liks) l[5] = 2e-3;
  const auto post = combine(init_uniform(g), liks, CombineMode::kProduct);
  EXPECT_EQ(map_estimate(post).value, 5u);
  EXPECT_NEAR(post.total(), 1.0, 1e-12);
}

TEST(Combine, EmptyListReturnsPrior) {
  const auto prior = init_uniform(square(4, 1.0));
  const auto post = combine(prior, std::span<const CellLikelihood>{});
  for (std::size_t i = 0; i < prior.size(); ++i) EXPECT_EQ(post[i], prior[i]);
}

TEST(Oracle, RandomSingleUpdatesMatchPerCellLoop) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = oracle::random_update(rng);
    EXPECT_LT(oracle::max_relative_error(c.posterior.mass(), c.expected), 1e-12) << c.kind << " trial " << trial;
    EXPECT_NEAR(c.posterior.total(), 1.0, 1e-9);
  }
}

TEST(Update, UnknownAnchorThrows) {
  const AnchorMap anchors;
  EXPECT_THROW(update_range(init_uniform(square(4, 1.0)), {"X", 1.0}, anchors, GaussianModel{}), InvalidArgument);
}

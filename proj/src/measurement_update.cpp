#include "gridfuse/measurement_update.hpp"

#include <cmath>
#include <limits>

namespace gridfuse {

GnssCaseModels GnssCaseModels::from_gmm(const GmmModel& gmm) {
  if (gmm.components.size() < 3) {
    throw InvalidArgument("gnss case routing needs a GMM with at least three components");
  }
  return {component_gaussian(gmm, 0), component_gaussian(gmm, 1), component_gaussian(gmm, 2)};
}

GnssCaseModels GnssCaseModels::gaussian(double sigma_pseudorange) {
  const GaussianModel sd{0.0, std::sqrt(2.0) * sigma_pseudorange};
  NoiseModel model = sd;
  validate(model);
  return {model, model, model};
}

std::optional<NoiseModel> select_case_model(const GnssCaseModels& models, Visibility a,
                                            Visibility b) {
  if (a == Visibility::kLos && b == Visibility::kLos) return models.los_los;
  if (a == Visibility::kNlos && b == Visibility::kLos) return models.nlos_los;
  if (a == Visibility::kLos && b == Visibility::kNlos) return models.los_nlos;
  return std::nullopt;
}

const ReferencePoint& find_anchor(const AnchorMap& anchors, const std::string& id) {
  const auto it = anchors.find(id);
  if (it == anchors.end()) throw InvalidArgument("unknown reference id '" + id + "'");
  return it->second;
}

CellLikelihood range_likelihood(const GridSpec& grid, const RangeObservation& obs,
                                const ReferencePoint& anchor, const NoiseModel& model) {
  const Innovation y = innovations(obs.range, gamma_distance(anchor, grid), false);
  CellLikelihood out(y.size());
  density_into(model, y, out);
  return out;
}

CellLikelihood tdoa_likelihood(const GridSpec& grid, const RangeDifferenceObservation& obs,
                               const ReferencePoint& ref_a, const ReferencePoint& ref_b,
                               const NoiseModel& model) {
  const Innovation y = innovations(obs.difference, gamma_hyperbolic(ref_a, ref_b, grid), false);
  CellLikelihood out(y.size());
  density_into(model, y, out);
  return out;
}

CellLikelihood aoa_likelihood(const GridSpec& grid, const AngleObservation& obs,
                              const ReferencePoint& anchor, const NoiseModel& model) {
  const Innovation y = innovations(obs.angle, gamma_angle(anchor, grid), true);
  CellLikelihood out(y.size());
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isnan(y[i])) continue;
    out[i] = density(model, y[i]);
    sum += out[i];
    ++valid;
  }
  const double neutral = valid > 0 ? sum / static_cast<double>(valid) : 1.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isnan(y[i])) out[i] = neutral;
  }
  return out;
}

Innovation bssd_innovations(const GridSpec& grid, const SatelliteObservation& a,
                            const SatelliteObservation& b) {
  const Gamma gamma = gamma_hyperbolic({a.sat_id, a.position, ReferenceKind::kSatellite},
                                       {b.sat_id, b.position, ReferenceKind::kSatellite}, grid);
  return innovations(a.pseudorange - b.pseudorange, gamma, false);
}

std::vector<CellLikelihood> gnss_pair_likelihoods(const GridSpec& grid, const GnssPseudoranges& obs,
                                                  const GnssCaseModels& models) {
  const auto& sats = obs.satellites;
  std::vector<CellLikelihood> out;
  if (sats.size() < 2) return out;

  // Satellite ranges are shared by every pair they take part in.
  std::vector<Gamma> ranges;
  ranges.reserve(sats.size());
  for (const auto& s : sats) {
    ranges.push_back(gamma_distance({s.sat_id, s.position, ReferenceKind::kSatellite}, grid));
  }
  const std::size_t n = grid.cell_count();
  Innovation y(n);
  for (std::size_t a = 0; a < sats.size(); ++a) {
    for (std::size_t b = 0; b < sats.size(); ++b) {
      if (a == b) continue;
      if (sats[a].position == sats[b].position) {
        throw InvalidArgument("satellites '" + sats[a].sat_id + "' and '" + sats[b].sat_id +
                              "' share a position");
      }
      const auto model = select_case_model(models, sats[a].visibility, sats[b].visibility);
      if (!model) continue;
      const double delta_rho = sats[a].pseudorange - sats[b].pseudorange;
      for (std::size_t i = 0; i < n; ++i) y[i] = delta_rho - (ranges[a][i] - ranges[b][i]);
      CellLikelihood lik(n);
      density_into(*model, y, lik);
      out.push_back(std::move(lik));
    }
  }
  return out;
}

LikelihoodField combine(const LikelihoodField& prior, std::span<const CellLikelihood> likelihoods,
                        CombineMode mode) {
  if (likelihoods.empty()) return prior;
  const std::size_t n = prior.size();
  for (const auto& l : likelihoods) {
    if (l.size() != n) throw InvalidArgument("likelihood array length does not match the grid");
  }

  std::vector<double> joint(n);
  if (mode == CombineMode::kSum) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (const auto& l : likelihoods) s += l[i];
      joint[i] = s;
      total += s;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw DegenerateField("observation likelihoods carry no mass");
    }
    const double eta = 1.0 / total;
    for (std::size_t i = 0; i < n; ++i) joint[i] = prior[i] * (joint[i] * eta);
  } else {
    // Log domain: long products of small likelihoods would underflow to zero.
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double lp = std::log(prior[i]);
      for (const auto& l : likelihoods) {
        if (!(l[i] >= 0.0) || !std::isfinite(l[i])) {
          throw DegenerateField("non-finite or negative likelihood");
        }
        lp += std::log(l[i]);
      }
      joint[i] = lp;
      peak = std::max(peak, lp);
    }
    if (!std::isfinite(peak)) throw DegenerateField("observation likelihoods carry no mass");
    for (double& v : joint) v = std::exp(v - peak);
  }
  return normalize_with_floor(prior.spec(), std::move(joint));
}

LikelihoodField update_range(const LikelihoodField& prior, const RangeObservation& obs,
                             const AnchorMap& anchors, const NoiseModel& model, CombineMode mode) {
  const auto& anchor = find_anchor(anchors, obs.anchor_id);
  const CellLikelihood lik[] = {range_likelihood(prior.spec(), obs, anchor, model)};
  return combine(prior, lik, mode);
}

LikelihoodField update_tdoa(const LikelihoodField& prior, const RangeDifferenceObservation& obs,
                            const AnchorMap& anchors, const NoiseModel& model, CombineMode mode) {
  const auto& a = find_anchor(anchors, obs.ref_a_id);
  const auto& b = find_anchor(anchors, obs.ref_b_id);
  const CellLikelihood lik[] = {tdoa_likelihood(prior.spec(), obs, a, b, model)};
  return combine(prior, lik, mode);
}

LikelihoodField update_aoa(const LikelihoodField& prior, const AngleObservation& obs,
                           const AnchorMap& anchors, const NoiseModel& model, CombineMode mode) {
  const auto& anchor = find_anchor(anchors, obs.anchor_id);
  const CellLikelihood lik[] = {aoa_likelihood(prior.spec(), obs, anchor, model)};
  return combine(prior, lik, mode);
}

GnssUpdate update_gnss_bssd(const LikelihoodField& prior, const GnssPseudoranges& obs,
                            const GnssCaseModels& models, CombineMode mode) {
  if (obs.satellites.size() < 2) return {prior, false, 0};
  const auto pairs = gnss_pair_likelihoods(prior.spec(), obs, models);
  if (pairs.empty()) return {prior, false, 0};
  return {combine(prior, pairs, mode), true, static_cast<int>(pairs.size())};
}

}  // namespace gridfuse

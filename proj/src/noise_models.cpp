#include "gridfuse/noise_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "gridfuse/geometry.hpp"

namespace gridfuse {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double log_gaussian(double y, double mean, double variance) {
  const double d = y - mean;
  return -0.5 * d * d / variance - 0.5 * std::log(2.0 * kPi * variance);
}

}  // namespace

NoiseModel make_mixture(double ratio, NoiseModel primary, NoiseModel secondary) {
  auto mixture = std::make_shared<const MixtureLikelihoodModel>(
      MixtureLikelihoodModel{ratio, std::move(primary), std::move(secondary)});
  NoiseModel model = mixture;
  validate(model);
  return model;
}

void validate(const NoiseModel& model) {
  std::visit(Overloaded{
                 [](const GaussianModel& g) {
                   if (!(g.stddev > 0.0) || !std::isfinite(g.stddev) || !std::isfinite(g.mean)) {
                     throw InvalidArgument("gaussian model needs finite mean and positive std");
                   }
                 },
                 [](const UniformModel& u) {
                   if (!(u.upper > u.lower) || !std::isfinite(u.lower) || !std::isfinite(u.upper)) {
                     throw InvalidArgument("uniform model needs finite lower < upper");
                   }
                 },
                 [](const GmmModel& m) {
                   if (m.components.empty()) throw InvalidArgument("gmm needs at least one component");
                   double total = 0.0;
                   for (const auto& c : m.components) {
                     if (!(c.variance > 0.0) || !(c.weight >= 0.0) || !std::isfinite(c.mean)) {
                       throw InvalidArgument("gmm component needs positive variance and weight >= 0");
                     }
                     total += c.weight;
                   }
                   if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("gmm weights must sum to 1");
                 },
                 [](const std::shared_ptr<const MixtureLikelihoodModel>& m) {
                   if (!m) throw InvalidArgument("null mixture model");
                   if (!(m->ratio >= 0.0 && m->ratio <= 1.0)) {
                     throw InvalidArgument("mixture ratio must lie in [0, 1]");
                   }
                   validate(m->primary);
                   validate(m->secondary);
                 },
             },
             model);
}

GmmModel make_gmm(std::vector<GmmComponent> components, bool renormalize) {
  if (renormalize) {
    double total = 0.0;
    for (const auto& c : components) total += c.weight;
    if (!(total > 0.0)) throw InvalidArgument("gmm weights must have positive sum");
    for (auto& c : components) c.weight /= total;
  }
  GmmModel gmm{std::move(components)};
  validate(gmm);
  return gmm;
}

GaussianModel component_gaussian(const GmmModel& gmm, std::size_t c) {
  if (c >= gmm.components.size()) throw InvalidArgument("gmm component index out of range");
  return {gmm.components[c].mean, std::sqrt(gmm.components[c].variance)};
}

double gaussian_pdf(double y, double mean, double stddev) {
  const double z = (y - mean) / stddev;
  return kInvSqrt2Pi / stddev * std::exp(-0.5 * z * z);
}

double density(const GaussianModel& model, double y) {
  return gaussian_pdf(y, model.mean, model.stddev);
}

double density(const GmmModel& model, double y) {
  double p = 0.0;
  for (const auto& c : model.components) {
    p += c.weight * gaussian_pdf(y, c.mean, std::sqrt(c.variance));
  }
  return p;
}

double density(const NoiseModel& model, double y) {
  return std::visit(
      Overloaded{
          [y](const GaussianModel& g) { return density(g, y); },
          [y](const UniformModel& u) {
            return (y >= u.lower && y <= u.upper) ? 1.0 / (u.upper - u.lower) : 0.0;
          },
          [y](const GmmModel& m) { return density(m, y); },
          [y](const std::shared_ptr<const MixtureLikelihoodModel>& m) {
            return m->ratio * density(m->primary, y) + (1.0 - m->ratio) * density(m->secondary, y);
          },
      },
      model);
}

void density_into(const NoiseModel& model, std::span<const double> y, std::span<double> out) {
  if (y.size() != out.size()) throw InvalidArgument("density_into needs equally sized spans");
  if (const auto* g = std::get_if<GaussianModel>(&model)) {
    const double inv_sigma = 1.0 / g->stddev;
    const double scale = kInvSqrt2Pi * inv_sigma;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double z = (y[i] - g->mean) * inv_sigma;
      out[i] = scale * std::exp(-0.5 * z * z);
    }
    return;
  }
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = density(model, y[i]);
}

double model_mean(const NoiseModel& model) {
  return std::visit(
      Overloaded{
          [](const GaussianModel& g) { return g.mean; },
          [](const UniformModel& u) { return 0.5 * (u.lower + u.upper); },
          [](const GmmModel& m) {
            double mean = 0.0;
            for (const auto& c : m.components) mean += c.weight * c.mean;
            return mean;
          },
          [](const std::shared_ptr<const MixtureLikelihoodModel>& m) {
            return m->ratio * model_mean(m->primary) + (1.0 - m->ratio) * model_mean(m->secondary);
          },
      },
      model);
}

double model_variance(const NoiseModel& model) {
  const double mean = model_mean(model);
  return std::visit(
      Overloaded{
          [](const GaussianModel& g) { return g.stddev * g.stddev; },
          [](const UniformModel& u) {
            const double w = u.upper - u.lower;
            return w * w / 12.0;
          },
          [mean](const GmmModel& m) {
            double second = 0.0;
            for (const auto& c : m.components) second += c.weight * (c.variance + c.mean * c.mean);
            return second - mean * mean;
          },
          [mean](const std::shared_ptr<const MixtureLikelihoodModel>& m) {
            auto second = [](const NoiseModel& part) {
              const double mu = model_mean(part);
              return model_variance(part) + mu * mu;
            };
            return m->ratio * second(m->primary) + (1.0 - m->ratio) * second(m->secondary) -
                   mean * mean;
          },
      },
      model);
}

double sample(const NoiseModel& model, Rng& rng) {
  return std::visit(
      Overloaded{
          [&rng](const GaussianModel& g) {
            return std::normal_distribution<double>(g.mean, g.stddev)(rng);
          },
          [&rng](const UniformModel& u) {
            return std::uniform_real_distribution<double>(u.lower, u.upper)(rng);
          },
          [&rng](const GmmModel& m) {
            std::vector<double> weights;
            weights.reserve(m.components.size());
            for (const auto& c : m.components) weights.push_back(c.weight);
            const auto pick = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
            const auto& c = m.components[pick];
            return std::normal_distribution<double>(c.mean, std::sqrt(c.variance))(rng);
          },
          [&rng](const std::shared_ptr<const MixtureLikelihoodModel>& m) {
            const bool primary = std::bernoulli_distribution(m->ratio)(rng);
            return sample(primary ? m->primary : m->secondary, rng);
          },
      },
      model);
}

double mean_log_likelihood(const GmmModel& model, std::span<const double> data) {
  double total = 0.0;
  std::vector<double> terms(model.components.size());
  for (double x : data) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < terms.size(); ++c) {
      const auto& comp = model.components[c];
      terms[c] = std::log(comp.weight) + log_gaussian(x, comp.mean, comp.variance);
      peak = std::max(peak, terms[c]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - peak);
    total += peak + std::log(acc);
  }
  return total / static_cast<double>(data.size());
}

namespace {

// k-means++ seeding followed by a few Lloyd iterations; returns hard labels.
std::vector<int> kmeans_labels(std::span<const double> data, int k, Rng& rng) {
  const std::size_t n = data.size();
  std::vector<double> centers;
  centers.push_back(data[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> dist2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (data[i] - c) * (data[i] - c));
      dist2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) {
      centers.push_back(data[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
      continue;
    }
    const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0.0;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += dist2[i];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centers.push_back(data[pick]);
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c) {
        if (std::abs(data[i] - centers[c]) < std::abs(data[i] - centers[best])) best = c;
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[labels[i]] += data[i];
      ++count[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
    }
    if (!changed) break;
  }
  return labels;
}

struct EmRun {
  GmmFit fit;
  bool degenerate = false;
};

constexpr double kBackgroundWeight = 0.05;

/// With `background`, k-1 components come from k-means and the last one spans
/// the whole sample at a small weight.
EmRun run_em(std::span<const double> data, int k, Rng& rng, double min_variance,
             const GmmFitOptions& options, bool background) {
  const std::size_t n = data.size();
  EmRun run;
  auto& comps = run.fit.model.components;
  comps.assign(k, GmmComponent{});

  const int clusters = background ? k - 1 : k;
  const auto labels = kmeans_labels(data, clusters, rng);
  {
    std::vector<double> sum(clusters, 0.0), sum2(clusters, 0.0);
    std::vector<std::size_t> count(clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[labels[i]] += data[i];
      ++count[labels[i]];
    }
    for (int c = 0; c < clusters; ++c) {
      if (count[c] < 2) {
        run.degenerate = true;
        return run;
      }
      comps[c].mean = sum[c] / static_cast<double>(count[c]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double d = data[i] - comps[labels[i]].mean;
      sum2[labels[i]] += d * d;
    }
    const double scale = background ? 1.0 - kBackgroundWeight : 1.0;
    for (int c = 0; c < clusters; ++c) {
      comps[c].weight = scale * static_cast<double>(count[c]) / static_cast<double>(n);
      comps[c].variance = sum2[c] / static_cast<double>(count[c]);
      if (!(comps[c].variance > min_variance)) {
        run.degenerate = true;
        return run;
      }
    }
    if (background) {
      const double mean = std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(n);
      double var = 0.0;
      for (double x : data) var += (x - mean) * (x - mean);
      comps[k - 1] = {kBackgroundWeight, mean, var / static_cast<double>(n)};
    }
  }

  std::vector<double> resp(n * static_cast<std::size_t>(k));
  std::vector<double> logw(k);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // E step
    double total_ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double peak = -std::numeric_limits<double>::infinity();
      double* r = &resp[i * k];
      for (int c = 0; c < k; ++c) {
        r[c] = std::log(comps[c].weight) + log_gaussian(data[i], comps[c].mean, comps[c].variance);
        peak = std::max(peak, r[c]);
      }
      double acc = 0.0;
      for (int c = 0; c < k; ++c) {
        r[c] = std::exp(r[c] - peak);
        acc += r[c];
      }
      for (int c = 0; c < k; ++c) r[c] /= acc;
      total_ll += peak + std::log(acc);
    }
    const double ll = total_ll / static_cast<double>(n);
    run.fit.log_likelihood.push_back(ll);
    run.fit.iterations = iter + 1;
    if (std::abs(ll - previous) < options.tolerance) {
      run.fit.converged = true;
      break;
    }
    previous = ll;

    // M step
    for (int c = 0; c < k; ++c) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * k + c];
        sx += resp[i * k + c] * data[i];
      }
      if (!(nk > 0.0)) {
        run.degenerate = true;
        return run;
      }
      const double mean = sx / nk;
      double sxx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = data[i] - mean;
        sxx += resp[i * k + c] * d * d;
      }
      const double variance = sxx / nk;
      if (!(variance > min_variance)) {
        run.degenerate = true;
        return run;
      }
      comps[c] = {nk / static_cast<double>(n), mean, variance};
    }
  }
  return run;
}

}  // namespace

GmmFit fit_gmm(std::span<const double> residuals, int components, std::uint64_t seed,
               const GmmFitOptions& options) {
  if (components < 1) throw InvalidArgument("gmm fit needs at least one component");
  if (residuals.size() < 10 * static_cast<std::size_t>(components)) {
    throw InvalidArgument("gmm fit needs at least 10 residuals per component");
  }
  for (double r : residuals) {
    if (!std::isfinite(r)) throw InvalidArgument("residuals must be finite");
  }
  const double n = static_cast<double>(residuals.size());
  const double mean = std::accumulate(residuals.begin(), residuals.end(), 0.0) / n;
  double var = 0.0;
  for (double r : residuals) var += (r - mean) * (r - mean);
  var /= n;
  const double min_variance = 1e-10 * var;

  // One start seeded by k-means alone and, for C > 1, one with a broad
  // background component; the higher final log-likelihood wins.
  std::optional<GmmFit> best;
  for (bool background : {false, true}) {
    if (background && (components < 2 || !options.background_start)) continue;
    for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
      Rng rng(seed + static_cast<std::uint64_t>(attempt));
      EmRun run = run_em(residuals, components, rng, min_variance, options, background);
      if (run.degenerate) continue;
      run.fit.restarts = attempt;
      if (!best || run.fit.log_likelihood.back() > best->log_likelihood.back()) best = std::move(run.fit);
      break;
    }
  }
  if (!best) throw CalibrationFailure("gmm fit collapsed to a degenerate component on every restart");
  std::sort(best->model.components.begin(), best->model.components.end(),
            [](const GmmComponent& a, const GmmComponent& b) { return a.weight > b.weight; });
  return *best;
}

}  // namespace gridfuse

#include "gridfuse/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace gridfuse {

ErrorSeries error_series(std::span<const Estimate> estimates, std::span<const GroundTruthSample> truth,
                         double tolerance) {
  ErrorSeries out;
  for (const auto& e : estimates) {
    const auto it = std::lower_bound(truth.begin(), truth.end(), e.timestamp,
                                     [](const GroundTruthSample& s, double t) { return s.t < t; });
    const GroundTruthSample* best = nullptr;
    if (it != truth.end()) best = &*it;
    if (it != truth.begin()) {
      const auto* prev = &*(it - 1);
      if (!best || e.timestamp - prev->t < best->t - e.timestamp) best = prev;
    }
    if (!best || std::abs(best->t - e.timestamp) > tolerance) {
      ++out.unmatched;
      continue;
    }
    out.timestamps.push_back(e.timestamp);
    out.errors.push_back(norm(best->position - e.position));
  }
  if (out.unmatched > 0) spdlog::warn("{} estimates have no reference sample", out.unmatched);
  return out;
}

double nearest_rank(std::span<const double> sorted, double pct) {
  if (sorted.empty()) throw InvalidArgument("percentile of an empty series");
  if (!(pct >= 0.0 && pct <= 100.0)) throw InvalidArgument("percentile must lie in [0, 100]");
  const auto n = static_cast<double>(sorted.size());
  // The small slack keeps exact ranks such as 25% of 4 from rounding up.
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

StatsSummary summarize(std::span<const double> series) {
  if (series.empty()) throw InvalidArgument("cannot summarize an empty series");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  StatsSummary s;
  s.count = sorted.size();
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
    s.variance = ss / static_cast<double>(s.count - 1);
  }
  s.p25 = nearest_rank(sorted, 25.0);
  s.p50 = nearest_rank(sorted, 50.0);
  s.p75 = nearest_rank(sorted, 75.0);
  s.median = s.p50;
  s.sigma1 = nearest_rank(sorted, 68.27);
  s.sigma2 = nearest_rank(sorted, 95.45);
  s.sigma3 = nearest_rank(sorted, 99.73);
  return s;
}

std::vector<std::pair<double, double>> ecdf(std::span<const double> series) {
  if (series.empty()) throw InvalidArgument("cannot build the ECDF of an empty series");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> steps;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    steps.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  return steps;
}

}  // namespace gridfuse

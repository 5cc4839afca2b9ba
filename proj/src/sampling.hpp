#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "restyle/backend.hpp"
#include "restyle/rng.hpp"

namespace restyle::detail {

/// Draws a key from a discrete distribution. Greedy takes the first maximum
/// (callers order keys by id, so ties go to the lowest id); sampling
/// rescales probabilities to p^(1/T) and uses one uniform draw.
template <class Key>
Key draw(const std::vector<std::pair<Key, double>>& dist, double temperature, DecodeMode mode, Rng& rng) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i)
    if (dist[i].second > dist[best].second) best = i;
  if (mode == DecodeMode::Greedy) return dist[best].first;
  const double log_max = std::log(dist[best].second);
  std::vector<double> w(dist.size());
  double total = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    w[i] = dist[i].second > 0.0 ? std::exp((std::log(dist[i].second) - log_max) / temperature) : 0.0;
    total += w[i];
  }
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (u < w[i]) return dist[i].first;
    u -= w[i];
  }
  // Rounding left u at the top edge.
  for (std::size_t i = dist.size(); i-- > 0;)
    if (w[i] > 0.0) return dist[i].first;
  return dist[best].first;
}

}  // namespace restyle::detail

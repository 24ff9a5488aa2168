#include "goalcast/distribution.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace goalcast {

double Distribution::of(const std::string& state) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == state) return probabilities.at(i);
  }
  throw std::out_of_range("no state '" + state + "' in distribution");
}

RankedStates top_k(const Distribution& distribution, std::size_t k) {
  std::vector<std::size_t> order(distribution.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distribution.probabilities[a] > distribution.probabilities[b];
  });
  order.resize(std::min(k, order.size()));
  RankedStates out;
  out.reserve(order.size());
  for (auto i : order) out.emplace_back(distribution.states[i], distribution.probabilities[i]);
  return out;
}

}  // namespace goalcast

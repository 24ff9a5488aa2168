#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace goalcast {

/// A probability distribution over labelled states.
struct Distribution {
  std::vector<std::string> states;
  std::vector<double> probabilities;

  std::size_t size() const noexcept { return states.size(); }

  /// Probability of `state`; throws std::out_of_range if the label is unknown.
  double of(const std::string& state) const;

  bool operator==(const Distribution&) const = default;
};

using RankedStates = std::vector<std::pair<std::string, double>>;

/// Top `k` states by probability, descending; equal probabilities keep state order.
RankedStates top_k(const Distribution& distribution, std::size_t k);

}  // namespace goalcast

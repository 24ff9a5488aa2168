#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "goalcast/distribution.hpp"

namespace goalcast {

/// Naive-Bayes term-spotting parameters. `likelihood[t][g]` is
/// P(term t appears in a query | goal g); absence of a term is not evidence.
struct TermModel {
  std::vector<std::string> goals;
  std::vector<double> priors;
  std::map<std::string, std::vector<double>> likelihood;

  std::set<std::string> vocabulary() const;
  bool operator==(const TermModel&) const = default;
};

/// Throws TermModelError unless priors sum to 1 (within 1e-9) and every
/// likelihood lies strictly inside (0,1).
void check(const TermModel& model);

/// Smoothing applied by the terms-file loader.
inline constexpr double kTermSmoothingAlpha = 0.1;
inline constexpr double kDefaultTermSampleSize = 100.0;

/// Reads a terms file:
///   goal <name> prior <p> [n <count>]
///   term <word> <goal>:<likelihood> ...
/// Likelihoods of exactly 0 or 1, and goals a term does not list, are replaced
/// by add-alpha estimates (alpha / (n + 2 alpha) or (n + alpha) / (n + 2 alpha))
/// using the goal's sample size n. Throws TermModelError naming the line.
TermModel parse_terms(std::istream& in);
TermModel parse_terms(const std::string& text);
/// Throws IoError when the file cannot be opened.
TermModel read_terms(const std::filesystem::path& path);

/// Lowercased alphanumeric tokens that are in the vocabulary, deduplicated.
std::set<std::string> tokenize(std::string_view text, const std::set<std::string>& vocabulary);

/// P(goal | terms) with the product taken in log space. Terms outside the
/// model are ignored, so an empty set yields the prior.
Distribution infer_from_terms(const std::set<std::string>& terms, const TermModel& model);

struct FusionWeights {
  double actions = 1.0;
  double words = 1.0;

  bool operator==(const FusionWeights&) const = default;
};

/// p(g) proportional to actions(g)^w_actions * words(g)^w_words, with 0^0 = 1.
/// Throws std::invalid_argument on mismatched supports or bad weights, and
/// DegenerateFusion when every goal gets zero mass.
Distribution fuse(const Distribution& actions, const Distribution& words, const FusionWeights& weights);

}  // namespace goalcast

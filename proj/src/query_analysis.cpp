#include "goalcast/query_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "goalcast/error.hpp"

namespace goalcast {

std::set<std::string> TermModel::vocabulary() const {
  std::set<std::string> out;
  for (const auto& [term, lik] : likelihood) out.insert(term);
  return out;
}

void check(const TermModel& model) {
  if (model.goals.empty()) throw TermModelError("term model has no goals");
  if (model.priors.size() != model.goals.size()) throw TermModelError("one prior per goal required");
  double sum = 0.0;
  for (double p : model.priors) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw TermModelError("goal prior outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw TermModelError("goal priors sum to " + std::to_string(sum));
  for (const auto& [term, lik] : model.likelihood) {
    if (lik.size() != model.goals.size()) throw TermModelError("term '" + term + "' needs one likelihood per goal");
    for (double p : lik) {
      if (!(p > 0.0 && p < 1.0)) throw TermModelError("term '" + term + "' has a likelihood outside (0,1)");
    }
  }
}

namespace {

std::optional<double> to_number(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw TermModelError("line " + std::to_string(line) + ": " + what);
}

}  // namespace

TermModel parse_terms(std::istream& in) {
  TermModel model;
  std::vector<double> sample_size;
  std::map<std::string, std::size_t> goal_index;
  struct Pending {
    std::size_t line;
    std::string term;
    std::vector<std::pair<std::string, double>> entries;
  };
  std::vector<Pending> pending;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    if (tok[0] == "goal") {
      if (tok.size() != 4 && tok.size() != 6) fail(line_no, "expected 'goal <name> prior <p> [n <count>]'");
      if (tok[2] != "prior") fail(line_no, "expected 'prior'");
      const auto p = to_number(tok[3]);
      if (!p) fail(line_no, "bad prior '" + tok[3] + "'");
      double n = kDefaultTermSampleSize;
      if (tok.size() == 6) {
        const auto c = to_number(tok[5]);
        if (tok[4] != "n" || !c || *c <= 0.0) fail(line_no, "expected 'n <positive count>'");
        n = *c;
      }
      if (!goal_index.emplace(tok[1], model.goals.size()).second) fail(line_no, "goal '" + tok[1] + "' repeated");
      model.goals.push_back(tok[1]);
      model.priors.push_back(*p);
      sample_size.push_back(n);
    } else if (tok[0] == "term") {
      if (tok.size() < 3) fail(line_no, "expected 'term <word> <goal>:<likelihood> ...'");
      Pending p{line_no, tok[1], {}};
      for (const char c : p.term) {
        if (!std::isalnum(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c))) {
          fail(line_no, "term '" + p.term + "' must be lowercase alphanumeric");
        }
      }
      for (std::size_t i = 2; i < tok.size(); ++i) {
        const auto colon = tok[i].rfind(':');
        if (colon == std::string::npos) fail(line_no, "expected <goal>:<likelihood>, found '" + tok[i] + "'");
        const auto v = to_number(std::string_view(tok[i]).substr(colon + 1));
        if (!v || *v < 0.0 || *v > 1.0) fail(line_no, "bad likelihood in '" + tok[i] + "'");
        p.entries.emplace_back(tok[i].substr(0, colon), *v);
      }
      pending.push_back(std::move(p));
    } else {
      fail(line_no, "expected 'goal' or 'term', found '" + tok[0] + "'");
    }
  }

  // Terms may precede goals in the file, so they are resolved at the end.
  for (const auto& p : pending) {
    if (model.likelihood.contains(p.term)) fail(p.line, "term '" + p.term + "' repeated");
    std::vector<std::optional<double>> given(model.goals.size());
    for (const auto& [goal, v] : p.entries) {
      const auto it = goal_index.find(goal);
      if (it == goal_index.end()) fail(p.line, "unknown goal '" + goal + "'");
      if (given[it->second]) fail(p.line, "goal '" + goal + "' listed twice for '" + p.term + "'");
      given[it->second] = v;
    }
    std::vector<double> lik(model.goals.size());
    for (std::size_t g = 0; g < lik.size(); ++g) {
      const double n = sample_size[g];
      const double a = kTermSmoothingAlpha;
      const double v = given[g].value_or(0.0);
      if (v <= 0.0) {
        lik[g] = a / (n + 2 * a);
      } else if (v >= 1.0) {
        lik[g] = (n + a) / (n + 2 * a);
      } else {
        lik[g] = v;
      }
    }
    model.likelihood.emplace(p.term, std::move(lik));
  }
  check(model);
  return model;
}

TermModel parse_terms(const std::string& text) {
  std::istringstream in(text);
  return parse_terms(in);
}

TermModel read_terms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open terms file " + path.string());
  return parse_terms(in);
}

std::set<std::string> tokenize(std::string_view text, const std::set<std::string>& vocabulary) {
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && vocabulary.contains(cur)) out.insert(cur);
    cur.clear();
  };
  for (const char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

namespace {

Distribution normalize_logs(std::vector<std::string> states, const std::vector<double>& logs) {
  const double top = *std::max_element(logs.begin(), logs.end());
  if (!std::isfinite(top)) throw DegenerateFusion("every goal has zero probability");
  std::vector<double> p(logs.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) z += p[i] = std::exp(logs[i] - top);
  for (auto& x : p) x /= z;
  return {std::move(states), std::move(p)};
}

}  // namespace

Distribution infer_from_terms(const std::set<std::string>& terms, const TermModel& model) {
  std::vector<double> logs(model.goals.size());
  for (std::size_t g = 0; g < logs.size(); ++g) logs[g] = std::log(model.priors[g]);
  bool any = false;
  for (const auto& t : terms) {
    const auto it = model.likelihood.find(t);
    if (it == model.likelihood.end()) continue;
    any = true;
    for (std::size_t g = 0; g < logs.size(); ++g) logs[g] += std::log(it->second[g]);
  }
  if (!any) return {model.goals, model.priors};
  return normalize_logs(model.goals, logs);
}

Distribution fuse(const Distribution& actions, const Distribution& words, const FusionWeights& w) {
  if (actions.states != words.states) throw std::invalid_argument("fused distributions must share their states");
  if (!(w.actions >= 0.0) || !(w.words >= 0.0) || !std::isfinite(w.actions) || !std::isfinite(w.words) ||
      (w.actions == 0.0 && w.words == 0.0)) {
    throw std::invalid_argument("fusion weights must be non-negative and not both zero");
  }
  // A zero weight on one side with unit weight on the other returns that side as given.
  if (w.words == 0.0 && w.actions == 1.0) return actions;
  if (w.actions == 0.0 && w.words == 1.0) return words;
  auto term = [](double p, double weight) {
    if (weight == 0.0) return 0.0;  // 0^0 = 1
    return p > 0.0 ? weight * std::log(p) : -std::numeric_limits<double>::infinity();
  };
  std::vector<double> logs(actions.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i] = term(actions.probabilities[i], w.actions) + term(words.probabilities[i], w.words);
  }
  return normalize_logs(actions.states, logs);
}

}  // namespace goalcast

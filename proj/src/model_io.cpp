#include "goalcast/model_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "goalcast/error.hpp"

namespace goalcast {

namespace {

struct Token {
  std::string text;
  std::size_t line;
};

std::vector<Token> lex(std::istream& in) {
  std::vector<Token> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t i = 0;
    while (i < line.size()) {
      const char c = line[i];
      if (c == '#') break;
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '{' || c == '}' || c == '=') {
        out.push_back({std::string(1, c), line_no});
        ++i;
      } else {
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != '{' &&
               line[j] != '}' && line[j] != '=' && line[j] != '#') {
          ++j;
        }
        out.push_back({line.substr(i, j - i), line_no});
        i = j;
      }
    }
  }
  return out;
}

struct Field {
  std::string key;
  std::vector<Token> values;
  std::size_t line;
};

struct Block {
  std::vector<Field> fields;
  std::optional<std::vector<Field>> temporal;
  std::size_t temporal_line = 0;
};

class Reader {
 public:
  explicit Reader(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  bool done() const { return pos_ >= tokens_.size(); }
  const Token& peek(std::size_t ahead = 0) const {
    static const Token eof{"<end of file>", 0};
    return pos_ + ahead < tokens_.size() ? tokens_[pos_ + ahead] : eof;
  }
  std::size_t line() const { return done() ? (tokens_.empty() ? 1 : tokens_.back().line) : peek().line; }

  Token take() {
    if (done()) throw ModelFormatError(line(), "unexpected end of file");
    return tokens_[pos_++];
  }
  void expect(const std::string& text) {
    const Token t = take();
    if (t.text != text) throw ModelFormatError(t.line, "expected '" + text + "', found '" + t.text + "'");
  }
  std::string name() {
    const Token t = take();
    if (t.text == "{" || t.text == "}" || t.text == "=") {
      throw ModelFormatError(t.line, "expected a name, found '" + t.text + "'");
    }
    return t.text;
  }

  // Fields up to and including the closing brace. A nested `temporal { ... }`
  // is accepted only when `allow_temporal` is set.
  Block block(bool allow_temporal) {
    expect("{");
    Block b;
    while (true) {
      if (done()) throw ModelFormatError(line(), "missing '}'");
      if (peek().text == "}") {
        ++pos_;
        return b;
      }
      if (allow_temporal && peek().text == "temporal" && peek(1).text == "{") {
        if (b.temporal) throw ModelFormatError(peek().line, "temporal block given twice");
        b.temporal_line = peek().line;
        ++pos_;
        b.temporal = block(false).fields;
        continue;
      }
      Field f;
      f.line = peek().line;
      f.key = name();
      expect("=");
      while (!done() && peek().text != "}" && peek().text != "{" && peek(1).text != "=" &&
             !(allow_temporal && peek().text == "temporal" && peek(1).text == "{")) {
        if (peek().text == "=") throw ModelFormatError(peek().line, "unexpected '='");
        f.values.push_back(take());
      }
      b.fields.push_back(std::move(f));
    }
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

double number(const Token& t) {
  double v = 0.0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw ModelFormatError(t.line, "expected a number, found '" + t.text + "'");
  }
  return v;
}

std::vector<double> numbers(const Field& f) {
  std::vector<double> out;
  out.reserve(f.values.size());
  for (const auto& t : f.values) out.push_back(number(t));
  return out;
}

std::vector<std::string> words(const Field& f) {
  std::vector<std::string> out;
  for (const auto& t : f.values) out.push_back(t.text);
  return out;
}

/// Single-occurrence fields by key, rejecting unknown and duplicate keys.
/// Keys listed in `repeatable` are collected in order under `repeated`.
std::map<std::string, const Field*> index_fields(const std::vector<Field>& fields, const std::set<std::string>& allowed,
                                                 const std::string& repeatable, std::vector<const Field*>* repeated,
                                                 const std::string& where) {
  std::map<std::string, const Field*> out;
  for (const auto& f : fields) {
    if (!allowed.contains(f.key) && f.key != repeatable) {
      throw ModelFormatError(f.line, "unknown field '" + f.key + "' in " + where);
    }
    if (f.key == repeatable) {
      repeated->push_back(&f);
    } else if (!out.emplace(f.key, &f).second) {
      throw ModelFormatError(f.line, "field '" + f.key + "' repeated in " + where);
    }
  }
  return out;
}

const Field& single_value(const Field& f) {
  if (f.values.size() != 1) throw ModelFormatError(f.line, "field '" + f.key + "' takes exactly one value");
  return f;
}

TemporalObservationSpec parse_temporal(const std::string& variable, const std::vector<Field>& fields,
                                       std::size_t block_line, const std::vector<double>& default_immediate) {
  const auto idx = index_fields(fields, {"immediate", "stale", "horizon", "shape", "param", "units"}, "", nullptr,
                                "temporal block of '" + variable + "'");
  TemporalObservationSpec spec;
  spec.variable = variable;
  if (auto it = idx.find("immediate"); it != idx.end()) {
    spec.immediate = numbers(*it->second);
  } else {
    spec.immediate = default_immediate;
  }
  const auto stale = idx.find("stale");
  if (stale == idx.end()) throw ModelFormatError(block_line, "temporal block of '" + variable + "' needs 'stale'");
  spec.stale = numbers(*stale->second);

  double scale = 1.0;
  AgeUnit units = AgeUnit::Actions;
  if (auto it = idx.find("units"); it != idx.end()) {
    const auto& u = single_value(*it->second).values.front();
    if (u.text == "actions") {
      units = AgeUnit::Actions;
    } else if (u.text == "ms") {
      units = AgeUnit::Millis;
    } else if (u.text == "s") {
      units = AgeUnit::Millis;
      scale = 1000.0;
    } else {
      throw ModelFormatError(u.line, "units must be actions, ms or s");
    }
  }

  std::vector<double> horizon{0.0};
  std::vector<double> param{0.0};
  std::vector<DecayShape> shape{DecayShape::Step};
  if (auto it = idx.find("horizon"); it != idx.end()) horizon = numbers(*it->second);
  if (auto it = idx.find("param"); it != idx.end()) param = numbers(*it->second);
  if (auto it = idx.find("shape"); it != idx.end()) {
    shape.clear();
    for (const auto& t : it->second->values) {
      const auto s = parse_shape(t.text);
      if (!s) throw ModelFormatError(t.line, "unknown decay shape '" + t.text + "'");
      shape.push_back(*s);
    }
  }
  const std::size_t n = std::max({horizon.size(), param.size(), shape.size()});
  for (const std::size_t len : {horizon.size(), param.size(), shape.size()}) {
    if (len != 1 && len != n) {
      throw ModelFormatError(block_line, "temporal block of '" + variable + "' mixes list lengths");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    DecaySpec d;
    d.horizon = horizon[horizon.size() == 1 ? 0 : i] * scale;
    d.parameter = param[param.size() == 1 ? 0 : i] * scale;
    d.shape = shape[shape.size() == 1 ? 0 : i];
    d.units = units;
    spec.decay.push_back(d);
  }
  return spec;
}

void agree(const std::vector<double>& stated, const std::vector<double>& implied, std::size_t line,
           const std::string& variable) {
  if (stated.size() != implied.size()) {
    throw ModelFormatError(line, "'" + variable + "': immediate values do not match the node's positions");
  }
  for (std::size_t i = 0; i < stated.size(); ++i) {
    if (std::abs(stated[i] - implied[i]) > 1e-9) {
      throw ModelFormatError(line, "'" + variable + "': immediate value " + std::to_string(i) +
                                       " disagrees with the node's own probability");
    }
  }
}

void parse_node(Reader& r, ModelDocument& doc, std::set<std::string>& defined) {
  const std::size_t line = r.line();
  const std::string var = r.name();
  const Token kind = r.take();
  if (kind.text != "cpt" && kind.text != "noisyor") {
    throw ModelFormatError(kind.line, "node kind must be 'cpt' or 'noisyor', found '" + kind.text + "'");
  }
  if (!defined.insert(var).second) throw ModelFormatError(line, "node '" + var + "' defined twice");
  const Block b = r.block(true);

  std::vector<const Field*> rows;
  if (kind.text == "cpt") {
    const auto idx = index_fields(b.fields, {"parents"}, "row", &rows, "node '" + var + "'");
    bn::CptNode node{var, {}, {}};
    if (auto it = idx.find("parents"); it != idx.end()) node.parents = words(*it->second);
    for (const auto* f : rows) node.rows.push_back(numbers(*f));
    if (b.temporal) {
      std::vector<double> from_rows;
      for (const auto& row : node.rows) {
        if (row.size() != 2) throw ModelFormatError(b.temporal_line, "temporal node '" + var + "' must be binary");
        from_rows.push_back(row[1]);
      }
      auto spec = parse_temporal(var, *b.temporal, b.temporal_line, from_rows);
      if (node.rows.empty()) {
        for (double p : spec.immediate) node.rows.push_back({1.0 - p, p});
      } else {
        agree(spec.immediate, from_rows, b.temporal_line, var);
      }
      doc.temporal.push_back(std::move(spec));
    }
    doc.network.set_node(std::move(node));
  } else {
    const auto idx = index_fields(b.fields, {"parents", "activation", "leak"}, "", nullptr, "node '" + var + "'");
    bn::NoisyOrNode node{var, {}, {}, 0.0};
    if (auto it = idx.find("parents"); it != idx.end()) node.parents = words(*it->second);
    const bool has_activation = idx.contains("activation");
    if (has_activation) node.activation = numbers(*idx.at("activation"));
    if (auto it = idx.find("leak"); it != idx.end()) node.leak = number(single_value(*it->second).values.front());
    if (b.temporal) {
      auto spec = parse_temporal(var, *b.temporal, b.temporal_line, node.activation);
      if (has_activation) {
        agree(spec.immediate, node.activation, b.temporal_line, var);
      } else {
        node.activation = spec.immediate;
      }
      doc.temporal.push_back(std::move(spec));
    }
    doc.network.set_node(std::move(node));
  }
}

void parse_variable(Reader& r, ModelDocument& doc) {
  const std::size_t line = r.line();
  bn::Variable v;
  v.name = r.name();
  const Block b = r.block(false);
  const auto idx = index_fields(b.fields, {"states", "kind"}, "", nullptr, "variable '" + v.name + "'");
  const auto states = idx.find("states");
  if (states == idx.end()) throw ModelFormatError(line, "variable '" + v.name + "' needs 'states'");
  v.states = words(*states->second);
  if (auto it = idx.find("kind"); it != idx.end()) {
    const auto& t = single_value(*it->second).values.front();
    const auto k = bn::parse_kind(t.text);
    if (!k) throw ModelFormatError(t.line, "unknown variable kind '" + t.text + "'");
    v.kind = *k;
  }
  if (doc.network.find_variable(v.name)) throw ModelFormatError(line, "variable '" + v.name + "' declared twice");
  doc.network.add_variable(std::move(v));
}

std::string num(double v) { return fmt::format("{}", v); }

std::string join_numbers(const std::vector<double>& values) {
  std::string out;
  for (double v : values) {
    out += ' ';
    out += num(v);
  }
  return out;
}

std::string join_words(const std::vector<std::string>& values) {
  std::string out;
  for (const auto& v : values) {
    out += ' ';
    out += v;
  }
  return out;
}

}  // namespace

ModelDocument parse_model(std::istream& in) {
  Reader r(lex(in));
  ModelDocument doc;
  std::set<std::string> defined;
  while (!r.done()) {
    const Token t = r.take();
    if (t.text == "variable") {
      parse_variable(r, doc);
    } else if (t.text == "node") {
      parse_node(r, doc, defined);
    } else {
      throw ModelFormatError(t.line, "expected 'variable' or 'node', found '" + t.text + "'");
    }
  }
  return doc;
}

ModelDocument parse_model(const std::string& text) {
  std::istringstream in(text);
  return parse_model(in);
}

ModelDocument read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network file " + path.string());
  return parse_model(in);
}

std::string print_model(const ModelDocument& doc) {
  std::map<std::string, const TemporalObservationSpec*> temporal;
  for (const auto& s : doc.temporal) temporal.emplace(s.variable, &s);

  std::string out;
  for (const auto& v : doc.network.variables()) {
    out += "variable " + v.name + " {\n";
    out += "  states =" + join_words(v.states) + "\n";
    out += "  kind = " + std::string(bn::to_string(v.kind)) + "\n";
    out += "}\n\n";
  }
  for (const auto& node : doc.network.nodes()) {
    const auto& var = bn::node_variable(node);
    if (const auto* cpt = std::get_if<bn::CptNode>(&node)) {
      out += "node " + var + " cpt {\n";
      if (!cpt->parents.empty()) out += "  parents =" + join_words(cpt->parents) + "\n";
      for (const auto& row : cpt->rows) out += "  row =" + join_numbers(row) + "\n";
    } else {
      const auto& nor = std::get<bn::NoisyOrNode>(node);
      out += "node " + var + " noisyor {\n";
      if (!nor.parents.empty()) out += "  parents =" + join_words(nor.parents) + "\n";
      out += "  activation =" + join_numbers(nor.activation) + "\n";
      out += "  leak = " + num(nor.leak) + "\n";
    }
    if (auto it = temporal.find(var); it != temporal.end()) {
      const auto& s = *it->second;
      std::vector<double> horizon;
      std::vector<double> param;
      std::vector<std::string> shape;
      for (const auto& d : s.decay) {
        horizon.push_back(d.horizon);
        param.push_back(d.parameter);
        shape.emplace_back(to_string(d.shape));
      }
      out += "  temporal {\n";
      out += "    immediate =" + join_numbers(s.immediate) + "\n";
      out += "    stale =" + join_numbers(s.stale) + "\n";
      out += "    horizon =" + join_numbers(horizon) + "\n";
      out += "    shape =" + join_words(shape) + "\n";
      out += "    param =" + join_numbers(param) + "\n";
      out += "    units = " + std::string(to_string(s.decay.empty() ? AgeUnit::Actions : s.units())) + "\n";
      out += "  }\n";
    }
    out += "}\n\n";
  }
  return out;
}

}  // namespace goalcast

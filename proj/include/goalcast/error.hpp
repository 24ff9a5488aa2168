#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace goalcast {

/// Base of every error the engine raises. Callers that only need a message
/// can catch this; the subclasses exist so tests and the CLI can tell
/// failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// event_stream
class OutOfOrderTimestamp : public Error {
 public:
  using Error::Error;
};

class LogParseError : public Error {
 public:
  LogParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// pattern_language
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, std::size_t column, const std::string& what)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class DuplicateName : public Error {
 public:
  using Error::Error;
};

class UnknownSymbol : public Error {
 public:
  using Error::Error;
};

class CyclicDefinition : public Error {
 public:
  using Error::Error;
};

// belief_network / temporal_inference
class UnknownVariable : public Error {
 public:
  using Error::Error;
};

class InconsistentEvidence : public Error {
 public:
  using Error::Error;
};

class InvalidNetwork : public Error {
 public:
  using Error::Error;
};

class UnitMismatch : public Error {
 public:
  using Error::Error;
};

class MissingAssistanceVariable : public Error {
 public:
  using Error::Error;
};

class ModelFormatError : public Error {
 public:
  ModelFormatError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// query_analysis
class DegenerateFusion : public Error {
 public:
  using Error::Error;
};

class TermModelError : public Error {
 public:
  using Error::Error;
};

// competency_profile
class UnknownCompetency : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaVersionError : public Error {
 public:
  using Error::Error;
};

class CorruptProfile : public Error {
 public:
  using Error::Error;
};

// assistance_controller
class DegenerateUtility : public Error {
 public:
  using Error::Error;
};

// engine_service
class BundleError : public Error {
 public:
  explicit BundleError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "bundle validation failed";
    for (const auto& p : problems) {
      out += "\n  ";
      out += p;
    }
    return out;
  }
  std::vector<std::string> problems_;
};

class UnknownSession : public Error {
 public:
  using Error::Error;
};

}  // namespace goalcast

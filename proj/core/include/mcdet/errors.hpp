#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcdet {

/// Raised when an input violates an operation's precondition (bad threshold,
/// degenerate box, inconsistent pass count, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a wire-format file cannot be parsed or violates its schema.
/// `line()` is 1-based for line-delimited files and 0 for whole-document files.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string{}) +
                           ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Raised when the trainer hook of a round fails.
class TrainerError : public std::runtime_error {
 public:
  TrainerError(int round, const std::string& what)
      : std::runtime_error("round " + std::to_string(round) + ": " + what), round_(round) {}

  int round() const noexcept { return round_; }

 private:
  int round_;
};

}  // namespace mcdet

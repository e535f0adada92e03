#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bridge {

class DagError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A node value left the 64-bit signed range. Generators treat this as a
// reject and resample.
class ArithmeticOverflow : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, std::size_t attempts)
      : std::runtime_error(what + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExtractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset / table parse failure; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class VerificationError : public std::runtime_error {
 public:
  VerificationError(const std::string& what, std::string task_id)
      : std::runtime_error("task " + task_id + ": " + what), task_id_(std::move(task_id)) {}
  const std::string& task_id() const { return task_id_; }

 private:
  std::string task_id_;
};

}  // namespace bridge

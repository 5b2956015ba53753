#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mitd {

// Malformed or inconsistent input data (files, tables, records).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A parse failure tied to a line of a line-oriented document.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line), message_(what) {}
  std::size_t line() const { return line_; }
  // The message without the line prefix.
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

// Non-finite activation or loss during training or evaluation.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mitd

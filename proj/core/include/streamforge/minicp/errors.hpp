#pragma once

#include <stdexcept>
#include <string>

namespace streamforge::minicp {

/// Syntax error with 1-based source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, int line, int column)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Name-resolution or type error raised while binding an expression to a model.
class BindError : public std::runtime_error {
 public:
  explicit BindError(std::string message) : std::runtime_error(std::move(message)) {}
};

/// Runtime evaluation failure (bad index, missing value, shape mismatch).
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(std::string message) : std::runtime_error(std::move(message)) {}
};

}  // namespace streamforge::minicp

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wbi {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed program text. Line and column are 1-based.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& msg, std::size_t line, std::size_t column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

enum class TypeErrorKind { use_before_define, reassignment };

/// A program violates the scoping or single-assignment rules.
class TypeError : public Error {
 public:
  TypeError(TypeErrorKind kind, std::string var, std::size_t command_index)
      : Error(describe(kind, var, command_index)),
        kind_(kind),
        var_(std::move(var)),
        command_index_(command_index) {}

  TypeErrorKind kind() const noexcept { return kind_; }
  const std::string& var() const noexcept { return var_; }
  std::size_t command_index() const noexcept { return command_index_; }

 private:
  static std::string describe(TypeErrorKind kind, const std::string& var, std::size_t index) {
    const char* what = kind == TypeErrorKind::use_before_define ? "use before definition of '"
                                                                 : "reassignment of '";
    return "command " + std::to_string(index) + ": " + what + var + "'";
  }

  TypeErrorKind kind_;
  std::string var_;
  std::size_t command_index_;
};

/// A numerical computation produced NaN or infinity.
class NumericError : public Error {
 public:
  NumericError(const std::string& msg, std::size_t command_index)
      : Error("command " + std::to_string(command_index) + ": " + msg),
        command_index_(command_index) {}
  explicit NumericError(const std::string& msg) : Error(msg), command_index_(npos) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t command_index() const noexcept { return command_index_; }

 private:
  std::size_t command_index_;
};

/// Shapes or dimensions of two operands disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace wbi

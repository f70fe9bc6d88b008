#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spaghetti {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input that cannot define a fit: too few points, repeated x, non-finite values.
class DegenerateInput : public Error {
public:
  using Error::Error;
};

/// A Cholesky pivot was nonpositive, even after the jitter retry.
class NotPositiveDefinite : public Error {
public:
  using Error::Error;
};

/// Invalid search or run configuration.
class InvalidConfig : public Error {
public:
  using Error::Error;
};

/// Input file could not be opened or read.
class IoError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, std::string text)
      : Error("parse error at line " + std::to_string(line) + ": '" + text + "'"),
        line_(line),
        text_(std::move(text)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& text() const noexcept { return text_; }

private:
  std::size_t line_;
  std::string text_;
};

}  // namespace spaghetti

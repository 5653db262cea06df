#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace depai {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CoNLL-U content. line() is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}
  // Same error, prefixed with where it happened (file, document).
  ParseError(const std::string& context, const ParseError& inner)
      : Error(context + ": " + inner.what()), line_(inner.line_), detail_(inner.detail_) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

class EncodingError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Bad manifest, config or inconsistent inputs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Bundle could not be loaded: version mismatch, checksum failure, corrupt payload.
class BundleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace depai

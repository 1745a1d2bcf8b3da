#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sparsesdf {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (shapes, ranges, month coverage).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// The interpolation set {lambda : F lambda = 1} is empty.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver hit its iteration cap.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, long iterations)
      : Error(what), iterations_(iterations) {}
  long iterations() const noexcept { return iterations_; }

 private:
  long iterations_;
};

/// Argument outside a function's mathematical domain (e.g. gross return <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Too many failed cells for a sweep result to be meaningful.
class SweepError : public Error {
 public:
  using Error::Error;
};

/// Should not happen; indicates a bug or a broken numerical invariant.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sparsesdf

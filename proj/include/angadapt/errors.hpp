#pragma once

#include <stdexcept>
#include <string>

namespace angadapt {

/// Malformed trees, mismatched block sizes and similar shape violations.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input file or configuration problems; carries the offending location.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& where, int line, const std::string& what)
      : std::runtime_error(where + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Iterative solve that did not reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace angadapt

#pragma once

#include <stdexcept>
#include <string>

namespace tclp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// The restricted block of P·U·P is (numerically) singular.
class SingularOnRange : public Error {
 public:
  SingularOnRange(const std::string& what, double time = 0.0, double smallest = 0.0)
      : Error(what), time_(time), smallest_(smallest) {}
  double time() const { return time_; }
  double smallest_singular_value() const { return smallest_; }

 private:
  double time_;
  double smallest_;
};

class StepUnderflow : public Error {
 public:
  StepUnderflow(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class NewtonDiverged : public Error {
 public:
  NewtonDiverged(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class DomainViolation : public Error {
 public:
  using Error::Error;
};

class PositivityViolation : public DomainViolation {
 public:
  using DomainViolation::DomainViolation;
};

class BiorthogonalityViolation : public Error {
 public:
  using Error::Error;
};

class NotHermitian : public Error {
 public:
  using Error::Error;
};

/// Exponential growth of a superoperator exponential exceeds the configured bound.
class ExponentialOverflow : public Error {
 public:
  using Error::Error;
};

/// A mean-value trajectory left the ansatz domain at `time()`.
class DomainExit : public Error {
 public:
  DomainExit(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::string key = {})
      : Error(what), line_(line), key_(std::move(key)) {}
  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::string field) : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace tclp

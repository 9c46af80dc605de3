#pragma once

#include <stdexcept>
#include <string>

namespace vinestress {

//! Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

//! Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
  using Error::Error;
};

//! A model could not be estimated from the supplied data.
class FitError : public Error {
public:
  using Error::Error;
};

//! Scenario estimation failed (no feasible point, too few exceedances, ...).
class EstimationError : public Error {
public:
  using Error::Error;
};

//! Vine regression could not produce a prediction.
class PredictionError : public Error {
public:
  using Error::Error;
};

//! Malformed input files or user arguments.
class InputError : public Error {
public:
  using Error::Error;
};

} // namespace vinestress

#pragma once

#include <stdexcept>
#include <string>

namespace skvg {

/// Base error for all failures raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid geometry input (degenerate box, length mismatch, ...).
struct GeometryError : Error {
  using Error::Error;
};

/// Invalid tensor shapes or layer configuration.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid run configuration or dataset file.
struct ConfigError : Error {
  using Error::Error;
};

/// Synthetic-data generation could not satisfy its constraints.
struct GeneratorError : Error {
  using Error::Error;
};

/// Text could not be analyzed (no nominal head, span out of range, ...).
struct LinguisticError : Error {
  using Error::Error;
};

}  // namespace skvg

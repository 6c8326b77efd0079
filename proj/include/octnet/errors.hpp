#pragma once

#include <stdexcept>
#include <string>

namespace octnet {

// Base class for all octnet errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/layer shape disagreement. The message names both shapes.
class ShapeError : public Error {
public:
  using Error::Error;
};

// An operation spec that cannot produce a valid output (e.g. output dim < 1).
class SpecError : public Error {
public:
  using Error::Error;
};

// A hyperparameter or argument outside its allowed range.
class ParamError : public Error {
public:
  using Error::Error;
};

// API contract violation (stale forward cache, unnormalized probabilities).
class ContractError : public Error {
public:
  using Error::Error;
};

// Class label outside [0, k) or malformed one-hot row.
class LabelError : public Error {
public:
  using Error::Error;
};

// Non-finite value where a finite one is required.
class NumericError : public Error {
public:
  using Error::Error;
};

// Filesystem / stream failures.
class IoError : public Error {
public:
  using Error::Error;
};

// Undecodable or malformed image file.
class DecodeError : public IoError {
public:
  using IoError::IoError;
};

// Checkpoint file problems, split by cause so callers can react.
class CheckpointError : public IoError {
public:
  using IoError::IoError;
};

class CheckpointVersionError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

class CheckpointTruncatedError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

class CheckpointShapeError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

}  // namespace octnet

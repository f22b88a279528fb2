#pragma once

#include <stdexcept>
#include <string>

namespace structh2 {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A matrix that is required to be Schur stable is not.
class UnstableMatrix : public Error {
 public:
  using Error::Error;
};

class UnstableClosedLoop : public Error {
 public:
  using Error::Error;
};

class EmptySubspace : public Error {
 public:
  using Error::Error;
};

// [X₋; U₋] lacks full row rank, so the consistency set is unbounded.
class RankDeficientData : public Error {
 public:
  using Error::Error;
};

// The consistency set has no interior (Schur slack not PSD).
class EmptyInterior : public Error {
 public:
  using Error::Error;
};

class SingularInnerBlock : public Error {
 public:
  using Error::Error;
};

// An LMI block references a variable that was never declared.
class UnboundedShape : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class StructureViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace structh2

#pragma once

#include <stdexcept>
#include <string>

namespace docmae {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto exit codes (validation 2, numeric 3, io 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Validation family.
class DimensionError : public Error {
 public:
  using Error::Error;
};
class GeometryError : public Error {
 public:
  using Error::Error;
};
class ContractError : public Error {
 public:
  using Error::Error;
};
class SpecError : public Error {
 public:
  using Error::Error;
};
class ValidationError : public Error {
 public:
  using Error::Error;
};
class CompatibilityError : public Error {
 public:
  using Error::Error;
};
class SegmentationError : public Error {
 public:
  using Error::Error;
};

// Numeric family.
class PoisonedStateError : public Error {
 public:
  using Error::Error;
};
class InversionError : public Error {
 public:
  using Error::Error;
};
class CertificateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace docmae

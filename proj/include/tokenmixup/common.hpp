#pragma once

#include <stdexcept>
#include <string>

// The library is normally built with 32-bit floats. A second build with
// TKMX_DOUBLE_PRECISION defined lives in its own inline namespace so both can
// be linked into one binary (the f64 build backs finite-difference checks).
#ifdef TKMX_DOUBLE_PRECISION
#define TKMX_ABI f64
#else
#define TKMX_ABI f32
#endif

namespace tkmx::inline TKMX_ABI {

#ifdef TKMX_DOUBLE_PRECISION
using Scalar = double;
#else
using Scalar = float;
#endif

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated an API contract (wrong argument ranges, missing gradients...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tkmx::inline TKMX_ABI

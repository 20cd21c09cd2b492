#pragma once

#include <stdexcept>
#include <string>

namespace dcboost {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroVectorError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class ValueError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DegenerateClassError : public Error { using Error::Error; };
class DegenerateOutputError : public Error { using Error::Error; };
class MetricUndefinedError : public Error { using Error::Error; };
class ArchitectureError : public Error { using Error::Error; };
class NonFiniteGradientError : public Error { using Error::Error; };

}  // namespace dcboost

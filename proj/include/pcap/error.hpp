#pragma once

#include <stdexcept>
#include <string>

namespace pcap {

/// Precondition on a numeric argument violated (p outside (1,d), r >= R, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Two cavity instances intersect.
class OverlapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mesh quality floor could not be met, or a refinement produced inverted cells.
class QualityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was handed fields or meshes that do not belong together.
class MismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pcap

#pragma once

#include <stdexcept>
#include <string>

namespace geotrack {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Mismatched group tags, dimensions, or otherwise invalid arguments.
class DomainError : public Error
{
public:
  using Error::Error;
};

/// Logarithm requested on the cut locus (rotation by pi).
class CutLocusError : public DomainError
{
public:
  using DomainError::DomainError;
};

/// Invalid user-facing configuration (non-SPD metric, non-positive gain, ...).
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Point outside the domain of a local trivialization.
class ChartError : public Error
{
public:
  using Error::Error;
};

/// Horizontal lift could not be constructed.
class LiftError : public Error
{
public:
  LiftError(const std::string & what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

private:
  double time_;
};

/// Feature deliberately outside the supported envelope.
class UnsupportedFeature : public Error
{
public:
  using Error::Error;
};

}  // namespace geotrack

#pragma once

#include <stdexcept>
#include <string>

namespace rkhs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Point outside the domain, or a parameter outside its admissible range.
struct DomainError : Error {
  using Error::Error;
};

struct TruncationError : Error {
  using Error::Error;
};

struct DegenerateDensityError : Error {
  using Error::Error;
};

// Division by a vanishing density in the normalized kernel.
struct DivisionDomainError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// A hypothesis of a bound or experiment does not hold for the given inputs.
struct PreconditionError : Error {
  using Error::Error;
};

}  // namespace rkhs

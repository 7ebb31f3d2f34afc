// Exception hierarchy shared by every module.

#ifndef DPCDVAE_ERROR_HPP_
#define DPCDVAE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dpcdvae {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument values: non-finite coordinates, out-of-range steps, shape mismatch.
struct InvalidInput : Error {
  using Error::Error;
};

// Lattice parameters that do not describe a realizable, right-handed cell.
struct GeometryError : Error {
  using Error::Error;
};

struct ReductionError : Error {
  using Error::Error;
};

// Two atoms on top of each other (zero-length edge).
struct DegenerateStructure : Error {
  using Error::Error;
};

struct ScheduleError : Error {
  using Error::Error;
};

// Non-finite values during sampling or training.
struct DivergenceError : Error {
  using Error::Error;
};

// Malformed input files (JSONL, CIF, checkpoint, config).
struct ParseError : Error {
  using Error::Error;
};

struct UnsupportedSymmetry : ParseError {
  using ParseError::ParseError;
};

}  // namespace dpcdvae
#endif

#pragma once

#include <stdexcept>
#include <string>

namespace voltvar {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument values or inconsistent dimensions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Edge list does not describe a tree rooted at the substation.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The message names the file and, where known, the line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on the wrong feeder kind (single-phase vs multiphase).
class KindError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// The constraint set is empty; the message names the binding rows.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Region enumeration found no consistent assignment, or several that disagree.
class BoundaryAmbiguityError : public Error {
 public:
  using Error::Error;
};

}  // namespace voltvar

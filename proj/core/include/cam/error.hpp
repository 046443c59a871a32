// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_ERROR_HPP
#define CAM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cam {

// Invalid distribution or function parameter (programming error on the caller side).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data or configuration violates a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A full conditional produced a non-finite quantity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cam

#endif  // CAM_ERROR_HPP

#ifndef GRIDRESTORE_ERRORS_HPP_
#define GRIDRESTORE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace gridrestore {

// Malformed feeder / config document.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed document whose contents break a model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised by the environment for action indices outside an agent's range.
// This is a programming error, never a learning signal.
class OutOfBoundsAction : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class TooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gridrestore

#endif  // GRIDRESTORE_ERRORS_HPP_

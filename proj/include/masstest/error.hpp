#pragma once

#include <stdexcept>
#include <string>

namespace masstest {

// Base class for failures caused by the data a caller handed us (bad shapes,
// non-finite values, malformed files). Programming errors on the caller side
// (out-of-range indices, invalid parameters) use the std exceptions instead.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace masstest

#pragma once

#include <stdexcept>
#include <string>

namespace depcar {

// Malformed or inconsistent data (bad corpus line, broken tree, empty output).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing files, unreadable paths, bad command-line usage.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace depcar

#pragma once

#include <stdexcept>
#include <string>

namespace splatmesh {

// Bad or missing user input (files, config values). Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A processing stage failed on otherwise valid input. Maps to exit code 1.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace splatmesh

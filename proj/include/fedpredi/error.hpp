#pragma once

#include <stdexcept>
#include <string>

namespace fedpredi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A requested partition target cannot be realized with integer assignments.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedpredi

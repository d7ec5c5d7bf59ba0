#pragma once

#include <stdexcept>
#include <string>

namespace avabc {

/// Invalid arguments, incompatible configurations and failed evaluations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace avabc

#pragma once

#include <stdexcept>
#include <string>

namespace caris {

// Root of every error the library throws. Each module derives its own
// named errors from this so callers can catch narrowly or broadly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CARIS_DEFINE_ERROR(Name, Base)         \
  class Name : public Base {                   \
   public:                                     \
    explicit Name(const std::string& what_arg) \
        : Base(#Name ": " + what_arg) {}       \
  }

// Raised when the active scenario switches a feature off.
CARIS_DEFINE_ERROR(DisabledByScenario, Error);

}  // namespace caris

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace autosec {

// Exception carrying a module-specific error code. Each module declares its own
// code enum and aliases `ErrorOf<ThatEnum>`, so callers can catch precisely.
template <typename Code>
class ErrorOf : public std::runtime_error {
 public:
  ErrorOf(Code code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

}  // namespace autosec

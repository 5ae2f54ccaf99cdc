#pragma once

#include <stdexcept>
#include <string>

namespace synctl {

// Typed runtime error. `code` is a stable machine-parsable identifier
// (e.g. "DisconnectedGraph"); `what()` is "<code>: <detail>" on one line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void raise(const std::string& code, const std::string& detail) {
  throw Error(code, detail);
}

inline void require(bool cond, const std::string& code, const std::string& detail) {
  if (!cond) raise(code, detail);
}

}  // namespace synctl

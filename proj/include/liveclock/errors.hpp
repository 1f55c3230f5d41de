#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace liveclock {

enum class ErrorKind {
  invalid_argument,
  scheduling,
  routing,
  propagation,
  solver,
  echo_timeout,
  invalid_exchange,
  duplicate_channel,
  incomplete_loop,
  config,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::scheduling: return "scheduling-error";
    case ErrorKind::routing: return "routing-error";
    case ErrorKind::propagation: return "propagation-error";
    case ErrorKind::solver: return "solver-error";
    case ErrorKind::echo_timeout: return "echo-timeout";
    case ErrorKind::invalid_exchange: return "invalid-exchange";
    case ErrorKind::duplicate_channel: return "duplicate-channel";
    case ErrorKind::incomplete_loop: return "incomplete-loop";
    case ErrorKind::config: return "config-error";
  }
  return "error";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace liveclock

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cwopt {

enum class ErrorKind {
  Domain,
  CapacityExceeded,
  Solver,
  Schema,
  Config,
  Training,
  Bundle,
  UndefinedMetric,
  FlaggedColumn,
  ScheduleGap,
  Coverage,
  Alignment,
  Load,
  Table,
  Ingestion,
  Service,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (CLI, HTTP
// layer, bindings) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace cwopt

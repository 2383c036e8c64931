#include "cwopt/error.hpp"

namespace cwopt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::CapacityExceeded: return "capacity-exceeded";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Config: return "config";
    case ErrorKind::Training: return "training";
    case ErrorKind::Bundle: return "bundle";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::FlaggedColumn: return "flagged-column";
    case ErrorKind::ScheduleGap: return "schedule-gap";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::Load: return "load";
    case ErrorKind::Table: return "table";
    case ErrorKind::Ingestion: return "ingestion";
    case ErrorKind::Service: return "service";
  }
  return "unknown";
}

}  // namespace cwopt

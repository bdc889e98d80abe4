#include "ssr/error.hpp"

namespace ssr {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::DegenerateMask: return "degenerate-mask";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::State: return "state";
    case ErrorKind::TrainingDivergence: return "training-divergence";
    case ErrorKind::Vocabulary: return "vocabulary";
    case ErrorKind::Io: return "io";
    case ErrorKind::Ingestion: return "ingestion";
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::Provider: return "provider";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace ssr

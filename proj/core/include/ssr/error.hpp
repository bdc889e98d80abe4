#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssr {

enum class ErrorKind {
  Parameter,
  EmptyInput,
  Alignment,
  DegenerateMask,
  Lookup,
  State,
  TrainingDivergence,
  Vocabulary,
  Io,
  Ingestion,
  Timeout,
  Provider,
  Config,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a category so the CLI can map
// it to a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace ssr

#pragma once

#include <stdexcept>
#include <string>

namespace causal {

enum class ErrorKind {
  invalid_argument,
  cyclic_graph,
  resource_limit,
  zero_probability,
  positivity,
  singular_conditioning,
  weak_instrument,
  exhaustion,
  constraint,
  routed_to_extended,
  structure,
  parse,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::cyclic_graph: return "cyclic-graph";
    case ErrorKind::resource_limit: return "resource-limit";
    case ErrorKind::zero_probability: return "zero-probability";
    case ErrorKind::positivity: return "positivity";
    case ErrorKind::singular_conditioning: return "singular-conditioning";
    case ErrorKind::weak_instrument: return "weak-instrument";
    case ErrorKind::exhaustion: return "exhaustion";
    case ErrorKind::constraint: return "constraint";
    case ErrorKind::routed_to_extended: return "routed-to-extended";
    case ErrorKind::structure: return "structure";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

}  // namespace causal

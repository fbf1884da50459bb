#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace alien {

// Failure categories surfaced by the library. The CLI maps these onto
// process exit codes; tests match on them instead of message text.
enum class Errc {
  invalid_geometry,
  too_many_targets,
  capacity_exceeded,
  shape_mismatch,
  odd_dimension,
  no_forward_state,
  bad_magic,
  truncated_file,
  placement_failure,
  dimension_mismatch,
  undefined_metric,
  diverged,
  io_failure,
  bad_config,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace alien

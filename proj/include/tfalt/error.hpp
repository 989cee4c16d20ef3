#pragma once

#include <stdexcept>
#include <string>

namespace tfalt {

enum class Errc {
  shape,
  degenerate_vector,
  invalid_argument,
  bad_magic,
  bad_flags,
  unsupported_version,
  truncated,
  label_out_of_range,
  dtype_mismatch,
  io,
  dimension_mismatch,
  missing_file,
  threshold,
  invalid_dataset,
  invalid_config,
  schedule_exhausted,
  divergence,
  configuration,
  hash_mismatch,
  dangling_reference,
  report,
};

const char* to_string(Errc code) noexcept;

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace tfalt

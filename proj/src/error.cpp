#include "tfalt/error.hpp"

namespace tfalt {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::shape: return "shape error";
    case Errc::degenerate_vector: return "degenerate vector";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::bad_magic: return "bad magic";
    case Errc::bad_flags: return "bad flags";
    case Errc::unsupported_version: return "unsupported version";
    case Errc::truncated: return "truncated payload";
    case Errc::label_out_of_range: return "label out of range";
    case Errc::dtype_mismatch: return "dtype mismatch";
    case Errc::io: return "i/o error";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::missing_file: return "missing file";
    case Errc::threshold: return "threshold error";
    case Errc::invalid_dataset: return "invalid dataset";
    case Errc::invalid_config: return "invalid config";
    case Errc::schedule_exhausted: return "schedule exhausted";
    case Errc::divergence: return "divergence";
    case Errc::configuration: return "configuration error";
    case Errc::hash_mismatch: return "hash mismatch";
    case Errc::dangling_reference: return "dangling reference";
    case Errc::report: return "report error";
  }
  return "unknown error";
}

}  // namespace tfalt

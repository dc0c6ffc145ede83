#include "cibhash/types.hpp"

namespace cibhash {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::bad_version: return "bad version";
    case ErrorCode::truncated: return "truncated file";
    case ErrorCode::non_finite: return "non-finite value";
    case ErrorCode::dimension_overflow: return "dimension overflow";
    case ErrorCode::malformed: return "malformed input";
    case ErrorCode::numerical: return "numerical blow-up";
  }
  return "unknown error";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace cibhash

#pragma once

#include <stdexcept>
#include <string>

namespace ccls {

enum class Errc {
  invalid_geometry,
  generation_failure,
  malformed_encoding,
  dimension_mismatch,
  element_out_of_range,
  invalid_degree,
  block_too_large,
  corrupt_layout,
  rank_deficient,
  manifest_mismatch,
  manifest_unavailable,
  not_stored,
  recovery_failed,
  tampered_trace,
  invalid_argument,
  io_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_geometry: return "invalid_geometry";
    case Errc::generation_failure: return "generation_failure";
    case Errc::malformed_encoding: return "malformed_encoding";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::element_out_of_range: return "element_out_of_range";
    case Errc::invalid_degree: return "invalid_degree";
    case Errc::block_too_large: return "block_too_large";
    case Errc::corrupt_layout: return "corrupt_layout";
    case Errc::rank_deficient: return "rank_deficient";
    case Errc::manifest_mismatch: return "manifest_mismatch";
    case Errc::manifest_unavailable: return "manifest_unavailable";
    case Errc::not_stored: return "not_stored";
    case Errc::recovery_failed: return "recovery_failed";
    case Errc::tampered_trace: return "tampered_trace";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io_error: return "io_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace ccls

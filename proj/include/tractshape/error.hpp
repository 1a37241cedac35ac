#pragma once

#include <stdexcept>
#include <string>

namespace tractshape {

// Failure categories surfaced by the library. Tests and the CLI dispatch on
// the code rather than on message text.
enum class Errc {
  malformed_header,
  unsupported_format,
  truncated_data,
  corrupt_data,
  invalid_input,
  io_error,
  alignment,
  duplicate_id,
  parse_error,
  format_error,
  missing_channel,
  no_reference,
  degenerate_reference,
  invalid_data,
  dimension_mismatch,
  unsupported_combination,
  fold_mismatch,
  undefined_correlation,
  diverged,
  incomplete_table,
  config_error,
};

const char* errc_name(Errc c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

inline const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::malformed_header: return "malformed header";
    case Errc::unsupported_format: return "unsupported format";
    case Errc::truncated_data: return "truncated data";
    case Errc::corrupt_data: return "corrupt data";
    case Errc::invalid_input: return "invalid input";
    case Errc::io_error: return "io error";
    case Errc::alignment: return "alignment error";
    case Errc::duplicate_id: return "duplicate id";
    case Errc::parse_error: return "parse error";
    case Errc::format_error: return "format error";
    case Errc::missing_channel: return "missing channel";
    case Errc::no_reference: return "no reference";
    case Errc::degenerate_reference: return "degenerate reference";
    case Errc::invalid_data: return "invalid data";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::unsupported_combination: return "unsupported combination";
    case Errc::fold_mismatch: return "fold mismatch";
    case Errc::undefined_correlation: return "undefined correlation";
    case Errc::diverged: return "diverged";
    case Errc::incomplete_table: return "incomplete table";
    case Errc::config_error: return "config error";
  }
  return "error";
}

}  // namespace tractshape

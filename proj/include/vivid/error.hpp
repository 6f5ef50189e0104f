// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vivid {

/// Failure categories. Each maps onto one CLI exit code via exit_code().
enum class Errc {
  usage,               // bad arguments or configuration
  shape,               // tensor shape precondition violated
  io,                  // file could not be opened or written
  bad_magic,           // file is not of the expected kind
  version_mismatch,    // file written by an unsupported format version
  truncated,           // file ended before the declared payload
  shape_inconsistent,  // header dimensions violate L = T_a/2 = 6*M
  missing_file,        // manifest references a file that does not exist
  missing_pair,        // evaluation could not pair generated and reference samples
  frozen,              // attempt to train a frozen checkpoint
  numeric,             // NaN/Inf or divergence
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::usage: return "usage";
    case Errc::shape: return "shape";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::truncated: return "truncated";
    case Errc::shape_inconsistent: return "shape_inconsistent";
    case Errc::missing_file: return "missing_file";
    case Errc::missing_pair: return "missing_pair";
    case Errc::frozen: return "frozen";
    case Errc::numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// 0 ok, 2 usage, 3 data error, 4 numeric failure.
inline int exit_code(Errc c) {
  switch (c) {
    case Errc::usage: return 2;
    case Errc::numeric: return 4;
    default: return 3;
  }
}

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace vivid

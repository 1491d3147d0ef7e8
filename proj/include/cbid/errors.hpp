#pragma once

#include <stdexcept>
#include <string>

namespace cbid {

// Invalid configuration values (degenerate distributions, bad Bloom geometry, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File system failures: unreadable inputs, short writes.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally invalid input bytes: bad magic, bad checksum, truncation.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A contract the system guarantees was observed to be broken (e.g. a true
// carrier flow missing from an attribution report). Aborts the run.
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cbid

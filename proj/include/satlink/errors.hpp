// Error taxonomy for the simulator; all conditions are reported as exceptions.
#pragma once

#include <stdexcept>
#include <string>

namespace satlink {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// |det| below the invertibility floor; signals a degenerate channel.
struct SingularMatrix : Error {
    using Error::Error;
};

/// Iterative PAC solver failed to meet its residual tolerance.
struct NonConvergence : Error {
    using Error::Error;
};

/// Precoder row with zero magnitude sum; cannot be envelope-normalized.
struct ZeroRow : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    using Error::Error;
};

struct LayoutOverflow : Error {
    using Error::Error;
};

struct OutOfBounds : Error {
    using Error::Error;
};

/// SOSF correlation peak below the detection threshold.
struct NoSync : Error {
    using Error::Error;
};

/// Differential frequency beyond the pilot-rate Nyquist guard.
struct Ambiguous : Error {
    using Error::Error;
};

/// All CSI reports older than the staleness bound.
struct StaleCsi : Error {
    using Error::Error;
};

struct UnknownModcod : Error {
    using Error::Error;
};

/// Invalid scenario configuration; message starts with the dotted field path.
struct ConfigError : Error {
    explicit ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

  private:
    std::string field_;
};

}  // namespace satlink

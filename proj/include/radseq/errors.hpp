#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace radseq {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape violation; the message names the offending axis.
struct DimensionError : Error {
    using Error::Error;
};

// Bad argument values: counts, fractions, empty inputs.
struct ArgumentError : Error {
    using Error::Error;
};

// Class label outside the expected range.
struct LabelError : Error {
    LabelError(const std::string& msg, std::size_t item_index)
        : Error(msg), index(item_index) {}
    std::size_t index = 0;
};

// File-format violation. `offset` is a byte offset for binary formats and a
// 1-based line number for line-oriented text formats.
struct ParseError : Error {
    ParseError(const std::string& msg, std::uint64_t at) : Error(msg), offset(at) {}
    std::uint64_t offset = 0;
};

// Filesystem failure while writing an artifact.
struct IoError : Error {
    using Error::Error;
};

// Network configuration whose layer geometry cannot be realized.
struct ConfigError : Error {
    using Error::Error;
};

// A requested partition cannot be honored.
struct SplitError : Error {
    using Error::Error;
};

// Training cannot start or diverged mid-run.
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace radseq

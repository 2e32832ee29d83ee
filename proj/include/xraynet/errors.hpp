#pragma once

#include <stdexcept>
#include <string>

namespace xraynet {

// Error taxonomy mirrored by the CLI exit codes:
//   UsageError -> 1, DataError -> 2, IoError -> 3, NumericError -> 4.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller misuse: bad arguments, incompatible shapes, invalid configs.
struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

struct ShapeError : UsageError {
    explicit ShapeError(const std::string& msg) : UsageError(msg) {}
};

struct ConfigError : UsageError {
    explicit ConfigError(const std::string& msg) : UsageError(msg) {}
};

// Bad input data: manifest rows, undecodable images, corrupt checkpoints.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

struct FormatError : DataError {
    explicit FormatError(const std::string& msg) : DataError(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf detected where finite values are required.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace xraynet

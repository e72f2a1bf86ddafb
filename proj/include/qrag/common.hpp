#pragma once

#include <stdexcept>
#include <string>

namespace qrag {

inline constexpr const char* kVersion = "0.1.0";

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed inputs: bad task instances, bad config values, dimension mismatches.
struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

// Illegal interaction with an episode (acting on a finished state, selecting
// a chunk that is no longer available).
struct EpisodeError : Error {
    explicit EpisodeError(const std::string& msg) : Error(msg) {}
};

// Non-finite values showed up where training cannot continue.
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

// File / serialization problems.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace qrag

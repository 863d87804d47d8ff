#pragma once

#include <stdexcept>
#include <string>

namespace streamvad {

// Error categories map onto CLI exit codes: ConfigError -> 2,
// MissingArtifactError -> 3, anything else that escapes -> 4.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed data files (pose streams, checkpoints, row files).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace streamvad

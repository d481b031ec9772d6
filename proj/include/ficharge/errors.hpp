#pragma once

#include <stdexcept>
#include <string>

namespace ficharge {

/// Bad scenario/profile/artifact configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Failed runtime validation of a result or property (CLI exit code 1).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ficharge

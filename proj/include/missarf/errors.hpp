#pragma once

#include <stdexcept>
#include <string>

namespace missarf {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, ParseError/SchemaError/DataError -> 3, anything
// else -> 4.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace missarf

#pragma once

#include <stdexcept>
#include <string>

namespace domdepth {

/// Bad user input: malformed configs, inconsistent buffers, invalid parameters.
/// The CLI maps this to exit code 1; anything else thrown maps to 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace domdepth

#pragma once

#include <stdexcept>
#include <string>

namespace semqa {

/// Error type thrown by all semqa operations. The message is a single
/// line suitable for machine parsing by the CLI ("error: <message>").
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace semqa

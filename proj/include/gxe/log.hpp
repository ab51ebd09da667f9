#pragma once

#include <functional>
#include <string>

namespace gxe {

using WarningHandler = std::function<void(const std::string&)>;

// Warnings go to stderr unless a handler is installed. Returns the previous
// handler so callers can restore it.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace gxe

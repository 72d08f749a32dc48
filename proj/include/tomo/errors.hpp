#pragma once

#include <stdexcept>
#include <string>

namespace tomo {

// Error taxonomy mirrors the CLI exit codes: io=2, validation=3, numerical=4.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-fatal diagnostics (spectrum renormalization, clamped negatives, ...).
void warn(const std::string& message);

}  // namespace tomo

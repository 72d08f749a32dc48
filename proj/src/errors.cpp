#include "tomo/errors.hpp"

#include <iostream>

namespace tomo {

void warn(const std::string& message) { std::cerr << "tomo: warning: " << message << "\n"; }

}  // namespace tomo

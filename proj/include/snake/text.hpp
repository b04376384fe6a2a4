#pragma once

#include <string>

namespace snake {

// Shortest decimal form that round-trips the exact double (locale-free).
std::string format_number(double v);

}  // namespace snake

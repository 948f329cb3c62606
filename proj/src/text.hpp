#pragma once

#include <cstdio>
#include <string>

namespace pmiv::detail {

/// Shortest text that parses back to the same double (%.17g).
inline std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Human-scale threshold label: 0.6 -> "60", 0.015 -> "1.5".
inline std::string percent_label(double q)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", q * 100.0);
    return buf;
}

} // namespace pmiv::detail

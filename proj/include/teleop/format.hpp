#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

namespace teleop {

// 17 significant digits, so the decimal text parses back to the same double
inline std::string format_double(double x) {
    if (!std::isfinite(x)) throw std::domain_error("cannot serialize a non-finite number");
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline void append_array(std::string& out, const Eigen::VectorXd& v) {
    out += '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    out += ']';
}

}  // namespace teleop

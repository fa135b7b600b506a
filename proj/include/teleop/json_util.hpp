#pragma once

#include "teleop/errors.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <string>

namespace teleop {

using nlohmann::json;

inline const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(std::string("missing field '") + key + "'");
    return j.at(key);
}

inline double as_double(const json& v, const char* what) {
    if (!v.is_number()) throw ConfigError(std::string("field '") + what + "' must be a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(std::string("field '") + what + "' is not finite");
    return x;
}

inline double get_or(const json& j, const char* key, double fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return as_double(j.at(key), key);
}

// Accepts an array of length n, or a scalar broadcast to n entries.
inline Eigen::VectorXd as_vector(const json& v, int n, const char* what) {
    if (v.is_number()) return Eigen::VectorXd::Constant(n, as_double(v, what));
    if (!v.is_array()) throw ConfigError(std::string("field '") + what + "' must be an array");
    if (n >= 0 && static_cast<int>(v.size()) != n)
        throw ConfigError(std::string("field '") + what + "' expects " + std::to_string(n) +
                          " entries, got " + std::to_string(v.size()));
    Eigen::VectorXd out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = as_double(v[i], what);
    return out;
}

inline Eigen::Vector3d as_vec3(const json& v, const char* what) {
    Eigen::VectorXd x = as_vector(v, 3, what);
    return Eigen::Vector3d(x[0], x[1], x[2]);
}

inline json to_json_array(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

}  // namespace teleop

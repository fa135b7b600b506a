#pragma once

#include <stdexcept>
#include <string>

namespace teleop {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, int index)
        : std::runtime_error(what), index_(index) {}
    int index() const { return index_; }

private:
    int index_;
};

// line is 1-based; 0 when the error is not tied to a line
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

inline void require_dim(long got, long want, const char* what) {
    if (got != want)
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                             ", got " + std::to_string(got));
}

}  // namespace teleop

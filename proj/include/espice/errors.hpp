#pragma once

#include <stdexcept>
#include <string>

namespace espice {

// Bad configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data; carries the 1-based line number when known.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& msg, std::size_t line)
        : ConfigError("line " + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Stream records out of global order (seq_no not strictly increasing).
class OrderError : public ConfigError {
public:
    OrderError(const std::string& msg, std::size_t line)
        : ConfigError("line " + std::to_string(line) + ": order error: " + msg) {}
};

// API misuse: violated precondition (CLI exit code 3).
class UsageError : public std::logic_error {
public:
    explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

// Component queried before it has enough data (model not built, probe empty).
class NotReadyError : public std::logic_error {
public:
    explicit NotReadyError(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace espice

#pragma once

#include <stdexcept>
#include <string>

namespace trajfuse {

/// Base of every error raised by the library. `kind()` is the stable,
/// machine-readable name surfaced by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& message) : Error("InvalidInput", message) {}
};

class HorizonMismatch : public Error {
public:
    explicit HorizonMismatch(const std::string& message) : Error("HorizonMismatch", message) {}
};

class ZeroConfidence : public Error {
public:
    explicit ZeroConfidence(const std::string& message) : Error("ZeroConfidence", message) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& message) : Error("NumericalError", message) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error("ParseError", message) {}
};

/// Filesystem failures; the message always names the offending path.
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("IoError", message) {}
};

}  // namespace trajfuse

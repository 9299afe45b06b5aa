#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rpsft {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside its documented domain (shape mismatch, k out of range, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// External input that violates a type invariant (non-finite entries, non-orthonormal basis, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An iterative method failed or an internal numerical postcondition did not hold.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss or failed to reach its target.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Malformed checkpoint container; carries the byte offset where decoding stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Bad configuration entry. line is 0 for command-line overrides and
/// kResolved for checks on the fully resolved config.
class ConfigError : public Error {
public:
    static constexpr std::size_t kResolved = static_cast<std::size_t>(-1);

    ConfigError(const std::string& key, std::size_t line, const std::string& what)
        : Error(format(key, line, what)), key_(key), line_(line) {}
    const std::string& key() const noexcept { return key_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& key, std::size_t line, const std::string& what) {
        if (line == kResolved) {
            return "config key '" + key + "': " + what;
        }
        std::string where = line == 0 ? std::string("--set") : "line " + std::to_string(line);
        return "config key '" + key + "' (" + where + "): " + what;
    }
    std::string key_;
    std::size_t line_;
};

} // namespace rpsft

#pragma once

#include <stdexcept>
#include <string>

namespace immunesom {

/// Raised when an input falls outside the domain an operation accepts
/// (negative counts, tcp > all, empty samples, mismatched dimensions).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when timestamped streams arrive out of order or disagree on keys.
class SequencingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the CSV and params readers. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace immunesom

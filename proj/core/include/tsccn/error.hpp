#pragma once

#include <stdexcept>
#include <string>

namespace tsccn {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Manifest validation failure; row() is the 1-based line number in the file
// (0 when the failure is not tied to a row).
class ManifestError : public Error {
public:
    ManifestError(const std::string& what, std::size_t row)
        : Error(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

// Raised when a training loss term becomes NaN/Inf; term() names the culprit.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& term, int epoch)
        : Error("non-finite loss term '" + term + "' at epoch " + std::to_string(epoch)),
          term_(term) {}

    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

}  // namespace tsccn

#ifndef EFPRUNE_ERRORS_HPP
#define EFPRUNE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace efprune {

// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor or layer shape disagreement. `layer` names the offending layer when known.
class DimensionError : public Error {
public:
    DimensionError(std::string layer, const std::string& what)
        : Error(layer.empty() ? what : layer + ": " + what), layer_(std::move(layer)) {}
    const std::string& layer() const noexcept { return layer_; }

private:
    std::string layer_;
};

// Non-finite loss or activation.
class NumericError : public Error {
public:
    NumericError(std::string layer, const std::string& what)
        : Error(layer.empty() ? what : layer + ": " + what), layer_(std::move(layer)) {}
    const std::string& layer() const noexcept { return layer_; }

private:
    std::string layer_;
};

// Pruning plan / model structure inconsistencies.
class StructureError : public Error {
public:
    using Error::Error;
};

// Invalid user-provided configuration (ratios, policies, flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class DataErrorKind { NotFound, BadMagic, Truncated, CountMismatch, SizeMismatch, BadFormat };

inline const char* to_string(DataErrorKind kind) {
    switch (kind) {
    case DataErrorKind::NotFound: return "not-found";
    case DataErrorKind::BadMagic: return "bad-magic";
    case DataErrorKind::Truncated: return "truncated";
    case DataErrorKind::CountMismatch: return "count-mismatch";
    case DataErrorKind::SizeMismatch: return "size-mismatch";
    case DataErrorKind::BadFormat: return "bad-format";
    }
    return "unknown";
}

class DataError : public Error {
public:
    DataError(DataErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    DataErrorKind kind() const noexcept { return kind_; }

private:
    DataErrorKind kind_;
};

} // namespace efprune

#endif // EFPRUNE_ERRORS_HPP

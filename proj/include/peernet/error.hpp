#ifndef PEERNET_ERROR_HPP
#define PEERNET_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace peernet {

/// Coarse failure category. The CLI prints it as the first token of its
/// one-line error message, so values are stable identifiers.
enum class ErrorKind {
    config,
    io,
    data,
    model,
    numeric,
    not_found,
    conflict,
    busy,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
        case ErrorKind::data: return "data";
        case ErrorKind::model: return "model";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::conflict: return "conflict";
        case ErrorKind::busy: return "busy";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace peernet

#endif // PEERNET_ERROR_HPP

#pragma once

#include <stdexcept>
#include <string>

namespace rdhomog {

enum class ErrorKind {
    Degenerate,
    SingularRadius,
    NotInvertible,
    ZeroPolynomial,
    IntervalDegenerate,
    DegreeDeficient,
    InsufficientData,
    NoModelFound,
    ConfigInvalid,
    ParseError,
};

inline const char *to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::SingularRadius: return "SingularRadius";
    case ErrorKind::NotInvertible: return "NotInvertible";
    case ErrorKind::ZeroPolynomial: return "ZeroPolynomial";
    case ErrorKind::IntervalDegenerate: return "IntervalDegenerate";
    case ErrorKind::DegreeDeficient: return "DegreeDeficient";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NoModelFound: return "NoModelFound";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

// Every failure raised by the library carries a kind so callers can branch
// on it without parsing messages.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

} // namespace rdhomog

// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace zrp {

enum class ErrorKind {
    InvalidRate,
    Divergence,
    Range,
    Inconsistency,
    Domain,
    Validation,
    NegativeDensity,
    Convergence,
    Ellipticity,
    Config,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every library failure is reported through this type; kind() lets callers
/// map failures to exit codes without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidRate: return "invalid-rate";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Range: return "range";
    case ErrorKind::Inconsistency: return "inconsistency";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::NegativeDensity: return "negative-density";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Ellipticity: return "ellipticity";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace zrp

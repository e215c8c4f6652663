#pragma once

#include <stdexcept>
#include <string>

namespace bellnoise {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside its documented domain (|r| > 1, step <= 0, ...).
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Too few samples for a statistic (e.g. a standard error from one trial).
class InsufficientData : public Error {
public:
    using Error::Error;
};

/// A Monte Carlo run was asked for zero trials.
class EmptyRun : public InsufficientData {
public:
    using InsufficientData::InsufficientData;
};

/// Latent Gaussian calibration did not reach its tolerance.
class CalibrationFailure : public Error {
public:
    CalibrationFailure(const std::string& what, double best_rho, double best_residual)
        : Error(what), best_rho_(best_rho), best_residual_(best_residual) {}

    double best_rho() const noexcept { return best_rho_; }
    double best_residual() const noexcept { return best_residual_; }

private:
    double best_rho_;
    double best_residual_;
};

} // namespace bellnoise

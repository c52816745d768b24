#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace dersim {

using Real = double;
using Complex = std::complex<double>;

inline constexpr Real kPi = 3.14159265358979323846;

enum class VoltageLevel { EHV, HV, MV, LV };

const char* to_string(VoltageLevel level);

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input data, parameters or run plans. The CLI maps these to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during initialization or time-domain simulation (exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace dersim

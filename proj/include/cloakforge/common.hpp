#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cloakforge {

using Real = double;
using Complex = std::complex<double>;
using Index = Eigen::Index;

using Vec2 = Eigen::Vector2d;
using CVec2 = Eigen::Vector2cd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr Complex I{0.0, 1.0};

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or out-of-range parameter (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: singular systems, degenerate geometry (CLI exit code 3).
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace cloakforge

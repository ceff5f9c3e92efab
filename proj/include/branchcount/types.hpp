#pragma once

#include <complex>
#include <random>
#include <stdexcept>
#include <string>

namespace branchcount {

using Complex = std::complex<double>;
using Rng = std::mt19937_64;

// Relative tolerance is measured against the norm of the state under test;
// absolute tolerance is the floor applied when that norm is itself tiny.
struct Tolerance {
    double rel = 1e-10;
    double abs = 1e-12;

    double scaled(double scale) const {
        double t = rel * scale;
        return t > abs ? t : abs;
    }
};

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct ZeroState : Error {
    explicit ZeroState(const std::string& msg) : Error(msg) {}
};

// Requested a direction orthogonal to everything seen so far, but the space
// is exhausted.
struct NoFreeDirection : Error {
    explicit NoFreeDirection(const std::string& msg) : Error(msg) {}
};

// Asked to peel a component larger than what remains.
struct PeelUnderflow : Error {
    explicit PeelUnderflow(const std::string& msg) : Error(msg) {}
};

struct DimensionTooSmall : Error {
    explicit DimensionTooSmall(const std::string& msg) : Error(msg) {}
};

// Standard normal via Box-Muller; two independent draws per call pair.
double gaussian(Rng& rng);

}  // namespace branchcount

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pndkit {

/// Thrown when a computation leaves its validated numerical regime
/// (trace drift, truncation overflow, unconverged integrals, ...).
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

enum class Arm { signal, idler };

/// Dense row-major matrix of doubles. Minimal on purpose: the linear
/// algebra in this toolkit is all explicit loops over small matrices.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// P[Binomial(n, eta) = k].  Exact product form for small n, log-gamma
/// otherwise; eta = 0 and eta = 1 are handled without special caller care.
double binomial_pmf(unsigned n, unsigned k, double eta);

namespace detail {

// splitmix64 step; used to derive independent engine seeds from
// (master_seed, stream_index) without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

} // namespace detail

} // namespace pndkit

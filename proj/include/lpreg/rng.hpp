#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace lpreg {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s = h ^ (b + 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

}  // namespace detail

// Derive a child key from a parent key and a stream index. Used for
// per-row, per-trial, and per-restart streams so that parallel and serial
// generation produce identical draws.
inline std::uint64_t derive_seed(std::uint64_t key, std::uint64_t stream) {
    return detail::mix64(key, stream);
}

inline std::uint64_t derive_seed(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
    return detail::mix64(detail::mix64(key, a), b);
}

// Counter-mode pseudo-random stream (splitmix64). Each stream is fully
// determined by its key; streams with distinct keys are independent for
// all practical purposes.
class RngStream {
  public:
    explicit RngStream(std::uint64_t key) : state_(key) {}
    RngStream(std::uint64_t key, std::uint64_t stream) : state_(derive_seed(key, stream)) {}

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    // Uniform on the open interval (0, 1); safe as input to log and
    // inverse-CDF transforms.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller (cosine branch).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Bailey's polar method; exact for any real nu > 0.
    double student_t(double nu) {
        if (nu <= 0.0) throw std::invalid_argument("student_t: nu must be > 0");
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(nu * (std::pow(u1, -2.0 / nu) - 1.0)) * std::cos(2.0 * M_PI * u2);
    }

    double laplace(double scale) {
        double u = uniform() - 0.5;
        return -scale * (u < 0.0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::fabs(u));
    }

    // Marsaglia-Tsang; shape > 0, unit scale.
    double gamma(double shape) {
        if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be > 0");
        if (shape < 1.0) {
            double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    double chi_squared(double nu) { return 2.0 * gamma(0.5 * nu); }

  private:
    std::uint64_t state_;
};

}  // namespace lpreg

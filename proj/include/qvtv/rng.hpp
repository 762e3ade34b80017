#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qvtv {

/// SplitMix64 finalizer. Used to derive independent child seeds from a
/// master seed so that parallel work units stay reproducible.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
    std::uint64_t s = mix_seed(master);
    s = mix_seed(s ^ (a + 0x1000193ULL));
    s = mix_seed(s ^ (b + 0x2000387ULL));
    return mix_seed(s ^ (c + 0x30005cbULL));
}

/// Random stream owned by one chain. Not thread safe; give each worker its own.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 42) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_(engine_); }

    double exponential() { return -std::log(uniform()); }

    /// Gamma with the given shape and scale (mean shape * scale).
    double gamma(double shape, double scale) {
        std::gamma_distribution<double> g(shape, scale);
        return g(engine_);
    }

    double chi_squared(double dof) { return gamma(0.5 * dof, 2.0); }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    /// Inverse gamma with density proportional to x^{-shape-1} exp(-rate / x).
    double inverse_gamma(double shape, double rate) { return rate / gamma(shape, 1.0); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace qvtv

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tomo {

/// Seeded generator with explicit value derivations, so streams are
/// reproducible across standard-library implementations (the std
/// distributions are not).
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double gaussian() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
};

}  // namespace tomo

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace weaver
{
    // Distribution transforms are written out by hand: the standard
    // distributions are implementation-defined and would break cross-platform
    // reproducibility of scenes and seeded parameters.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : engine_(seed) {}

        std::uint64_t next() { return engine_(); }

        /// Uniform in [0, 1).
        double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

        /// Uniform integer in [0, n).
        std::uint64_t below(std::uint64_t n)
        {
            const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
            std::uint64_t x;
            do
                x = engine_();
            while (x >= limit);
            return x % n;
        }

        bool chance(double p) { return uniform() < p; }

        double normal()
        {
            if (has_spare_) {
                has_spare_ = false;
                return spare_;
            }
            double u1;
            do
                u1 = uniform();
            while (u1 <= 0.0);
            const double u2 = uniform();
            const double r = std::sqrt(-2.0 * std::log(u1));
            spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
            has_spare_ = true;
            return r * std::cos(2.0 * std::numbers::pi * u2);
        }

    private:
        std::mt19937_64 engine_;
        double spare_ = 0.0;
        bool has_spare_ = false;
    };
}

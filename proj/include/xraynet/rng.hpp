#pragma once

#include <cmath>
#include <cstdint>

#include "xraynet/errors.hpp"
#include "xraynet/tensor.hpp"

namespace xraynet {

// Deterministic generator with a documented bit-exact stream:
//   state_{n+1} = state_n + 0x9E3779B97F4A7C15
//   output_n    = splitmix64 finalizer of state_{n+1}
// Uniform doubles take the top 53 bits; normals use Box-Muller on consecutive
// uniforms with the spare cached. Identical seed + call sequence gives an
// identical stream on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t nextU64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double nextUniform() {
        return static_cast<double>(nextU64() >> 11) * 0x1.0p-53;
    }

    // Integer in [0, bound) without modulo bias beyond 2^-64 (plain modulo is
    // fine at the bounds this project uses, but rejection keeps it exact).
    std::uint64_t nextBelow(std::uint64_t bound) {
        const std::uint64_t threshold = (0ULL - bound) % bound;
        for (;;) {
            const std::uint64_t r = nextU64();
            if (r >= threshold) {
                return r % bound;
            }
        }
    }

    double nextNormal() {
        if (hasSpare_) {
            hasSpare_ = false;
            return spare_;
        }
        double u1 = nextUniform();
        double u2 = nextUniform();
        while (u1 <= 0.0) {
            u1 = nextUniform();
        }
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        hasSpare_ = true;
        return radius * std::cos(angle);
    }

    template <typename T>
    TensorT<T> fillNormal(std::vector<std::size_t> shape, double mean, double std) {
        if (std <= 0.0) {
            throw UsageError("rng_fill_normal requires std > 0");
        }
        TensorT<T> out(std::move(shape));
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<T>(mean + std * nextNormal());
        }
        return out;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool hasSpare_ = false;
};

}  // namespace xraynet

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace isac {

/// 64-bit FNV-1a over raw bytes. Used for content hashes and seed derivation.
uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ULL);

/// SplitMix64 finalizer; decorrelates derived seeds.
uint64_t mix64(uint64_t x);

/// Derive an independent stream seed from a base seed and a salt/tag.
uint64_t derive_seed(uint64_t base, uint64_t salt);
uint64_t derive_seed(uint64_t base, std::string_view tag);
uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t salt);

/// Deterministic RNG with portable distributions. std::mt19937_64 output is
/// specified by the standard; the distribution transforms below avoid the
/// implementation-defined std::*_distribution classes so streams are
/// bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0,1) with 53 random bits.
    double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (cosine branch only).
    double normal() {
        double u1 = 1.0 - u01();  // (0,1]
        double u2 = u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    /// Uniform integer in [0, n). Rejection-free modulo is fine here; n is
    /// tiny compared to 2^64 so the bias is far below double precision.
    int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

private:
    std::mt19937_64 gen_;
};

}  // namespace isac

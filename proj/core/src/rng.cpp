#include "isac/rng.hpp"

#include <cmath>

namespace isac {

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a64(std::string_view s, uint64_t seed) { return fnv1a64(s.data(), s.size(), seed); }

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t base, uint64_t salt) { return mix64(base ^ mix64(salt)); }

uint64_t derive_seed(uint64_t base, std::string_view tag) {
    return mix64(base ^ fnv1a64(tag));
}

uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t salt) {
    return mix64(derive_seed(base, tag) ^ mix64(salt));
}

}  // namespace isac

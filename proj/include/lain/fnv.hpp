#pragma once

#include <cstdint>
#include <string_view>

namespace lain {

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* p, std::size_t n) {
        auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 0x100000001b3ULL;
        }
    }
    void str(std::string_view s) { bytes(s.data(), s.size()); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            unsigned char b = static_cast<unsigned char>(v >> (8 * i));
            bytes(&b, 1);
        }
    }
};

}  // namespace lain

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace phishlens {

// FNV-1a, 64-bit, over raw bytes. Fixed constants so hashed feature
// buckets are reproducible across platforms and languages.
constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = kFnvOffsetBasis;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

bool is_ascii_space(char c);

// ASCII-only lowercasing; bytes >= 0x80 pass through untouched.
std::string to_lower(std::string_view s);
char ascii_lower(char c);

// Collapses runs of ASCII whitespace to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);

// Byte length of the UTF-8 sequence starting at s[pos] (1 for invalid bytes,
// so iteration always makes progress).
std::size_t utf8_char_len(std::string_view s, std::size_t pos);

// Number of code points, counting each invalid byte as one character.
std::size_t utf8_length(std::string_view s);

// First n characters (code points); never splits a valid sequence.
std::string utf8_truncate(std::string_view s, std::size_t n);

// Replaces invalid UTF-8 sequences with U+FFFD.
std::string utf8_lossy(std::string_view bytes);

void append_utf8(std::string& out, std::uint32_t code_point);

// Shannon entropy of the byte distribution, in bits per byte. 0 for empty.
double shannon_entropy(std::string_view bytes);

}  // namespace phishlens

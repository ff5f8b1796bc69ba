#include "phishlens/text.hpp"

#include <array>
#include <cmath>

namespace phishlens {

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back(ascii_lower(c));
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_ascii_space(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

std::size_t utf8_char_len(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) return 0;
    unsigned char c = static_cast<unsigned char>(s[pos]);
    std::size_t len = 0;
    if (c < 0x80) return 1;
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    else return 1;  // stray continuation or invalid lead byte
    if (pos + len > s.size()) return 1;
    for (std::size_t i = 1; i < len; ++i) {
        if ((static_cast<unsigned char>(s[pos + i]) & 0xC0) != 0x80) return 1;
    }
    return len;
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0, pos = 0;
    while (pos < s.size()) {
        pos += utf8_char_len(s, pos);
        ++n;
    }
    return n;
}

std::string utf8_truncate(std::string_view s, std::size_t n) {
    std::size_t count = 0, pos = 0;
    while (pos < s.size() && count < n) {
        pos += utf8_char_len(s, pos);
        ++count;
    }
    return std::string(s.substr(0, pos));
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string utf8_lossy(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        unsigned char c = static_cast<unsigned char>(bytes[pos]);
        std::size_t len = utf8_char_len(bytes, pos);
        if (len == 1 && c >= 0x80) {
            out += "\xEF\xBF\xBD";
            ++pos;
            continue;
        }
        if (len >= 2) {
            // Reject overlong encodings and out-of-range code points.
            std::uint32_t cp = c & (0x7F >> len);
            for (std::size_t i = 1; i < len; ++i) {
                cp = (cp << 6) | (static_cast<unsigned char>(bytes[pos + i]) & 0x3F);
            }
            static constexpr std::array<std::uint32_t, 5> min_cp{0, 0, 0x80, 0x800, 0x10000};
            if (cp < min_cp[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
                out += "\xEF\xBF\xBD";
                pos += len;
                continue;
            }
        }
        out.append(bytes.substr(pos, len));
        pos += len;
    }
    return out;
}

double shannon_entropy(std::string_view bytes) {
    if (bytes.empty()) return 0.0;
    std::array<std::size_t, 256> counts{};
    for (unsigned char c : bytes) ++counts[c];
    const double n = static_cast<double>(bytes.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

}  // namespace phishlens

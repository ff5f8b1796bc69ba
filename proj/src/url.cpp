#include "phishlens/url.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "phishlens/text.hpp"

namespace phishlens {

namespace {

bool is_scheme_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_scheme_char(char c) {
    return is_scheme_start(c) || (c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.';
}

// scheme ":" per RFC 3986; returns length of scheme or 0.
std::size_t scheme_length(std::string_view s) {
    if (s.empty() || !is_scheme_start(s[0])) return 0;
    std::size_t i = 1;
    while (i < s.size() && is_scheme_char(s[i])) ++i;
    if (i < s.size() && s[i] == ':') return i;
    return 0;
}

void split_authority(std::string_view authority, Url& url) {
    // Drop userinfo if present.
    if (auto at = authority.rfind('@'); at != std::string_view::npos) {
        authority = authority.substr(at + 1);
    }
    if (!authority.empty() && authority.front() == '[') {
        // IPv6 literal
        auto close = authority.find(']');
        if (close == std::string_view::npos) {
            url.host = to_lower(authority);
            return;
        }
        url.host = to_lower(authority.substr(0, close + 1));
        if (close + 1 < authority.size() && authority[close + 1] == ':') {
            url.port = std::string(authority.substr(close + 2));
        }
        return;
    }
    auto colon = authority.rfind(':');
    if (colon != std::string_view::npos &&
        authority.find_first_not_of("0123456789", colon + 1) == std::string_view::npos) {
        url.host = to_lower(authority.substr(0, colon));
        url.port = std::string(authority.substr(colon + 1));
    } else {
        url.host = to_lower(authority);
    }
}

bool looks_like_ipv4(std::string_view host) {
    int dots = 0;
    for (char c : host) {
        if (c == '.') ++dots;
        else if (c < '0' || c > '9') return false;
    }
    return dots == 3 && !host.empty();
}

}  // namespace

std::string Url::str() const {
    std::string out;
    if (!scheme.empty()) {
        out += scheme;
        out += ':';
    }
    if (has_authority) {
        out += "//";
        out += authority();
    }
    out += path;
    if (!query.empty()) {
        out += '?';
        out += query;
    }
    if (!fragment.empty()) {
        out += '#';
        out += fragment;
    }
    return out;
}

std::optional<Url> parse_url(std::string_view input) {
    // Trim surrounding ASCII whitespace; embedded control chars make the
    // reference unusable as a fetch target but harmless to classify.
    while (!input.empty() && is_ascii_space(input.front())) input.remove_prefix(1);
    while (!input.empty() && is_ascii_space(input.back())) input.remove_suffix(1);

    Url url;
    std::string_view rest = input;

    if (auto n = scheme_length(rest); n > 0) {
        url.scheme = to_lower(rest.substr(0, n));
        rest.remove_prefix(n + 1);
    }
    if (rest.size() >= 2 && rest[0] == '/' && rest[1] == '/') {
        url.has_authority = true;
        rest.remove_prefix(2);
        auto end = rest.find_first_of("/?#");
        split_authority(rest.substr(0, end), url);
        rest = (end == std::string_view::npos) ? std::string_view{} : rest.substr(end);
    }
    if (auto h = rest.find('#'); h != std::string_view::npos) {
        url.fragment = std::string(rest.substr(h + 1));
        rest = rest.substr(0, h);
    }
    if (auto q = rest.find('?'); q != std::string_view::npos) {
        url.query = std::string(rest.substr(q + 1));
        rest = rest.substr(0, q);
    }
    url.path = std::string(rest);
    if (!url.scheme.empty() && !url.has_authority && url.path.empty() && url.query.empty() &&
        url.fragment.empty()) {
        return std::nullopt;  // bare "scheme:" with nothing usable
    }
    return url;
}

bool is_relative_reference(std::string_view href) {
    auto parsed = parse_url(href);
    if (!parsed) return false;
    return parsed->scheme.empty() && !parsed->has_authority;
}

Url resolve_url(const Url& base, std::string_view reference) {
    auto ref = parse_url(reference);
    if (!ref) return base;
    if (!ref->scheme.empty()) return *ref;

    Url out = *ref;
    out.scheme = base.scheme;
    if (ref->has_authority) return out;

    out.host = base.host;
    out.port = base.port;
    out.has_authority = base.has_authority;
    if (ref->path.empty()) {
        out.path = base.path;
        if (ref->query.empty()) out.query = base.query;
    } else if (ref->path.front() != '/') {
        auto slash = base.path.rfind('/');
        out.path = (slash == std::string::npos) ? "/" + ref->path
                                                : base.path.substr(0, slash + 1) + ref->path;
    }
    return out;
}

DomainRules DomainRules::from_file(const std::filesystem::path& psl_path) {
    std::ifstream in(psl_path);
    if (!in) {
        throw std::runtime_error("cannot open public suffix list: " + psl_path.string());
    }
    DomainRules rules;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        auto end = line.find_first_of(" \t", start);
        std::string token = to_lower(line.substr(start, end - start));
        if (token.rfind("//", 0) == 0) continue;
        if (token.front() == '!') {
            rules.exceptions_.insert(token.substr(1));
        } else {
            rules.rules_.insert(std::move(token));
        }
    }
    return rules;
}

std::string DomainRules::registrable_domain(std::string_view host) const {
    std::string h = to_lower(host);
    if (!h.empty() && h.back() == '.') h.pop_back();
    if (h.empty() || looks_like_ipv4(h) || h.front() == '[') return h;

    std::vector<std::string> labels;
    std::size_t pos = 0;
    while (pos <= h.size()) {
        auto dot = h.find('.', pos);
        if (dot == std::string::npos) {
            labels.push_back(h.substr(pos));
            break;
        }
        labels.push_back(h.substr(pos, dot - pos));
        pos = dot + 1;
    }

    if (rules_.empty()) {
        if (labels.size() <= 2) return h;
        return labels[labels.size() - 2] + "." + labels.back();
    }

    // Longest matching rule wins; exception rules mark the registrable
    // domain itself.
    std::size_t suffix_len = 0;  // labels in the public suffix
    for (std::size_t take = 1; take <= labels.size(); ++take) {
        std::string candidate;
        for (std::size_t i = labels.size() - take; i < labels.size(); ++i) {
            if (!candidate.empty()) candidate += '.';
            candidate += labels[i];
        }
        if (exceptions_.count(candidate)) {
            suffix_len = take - 1;
            break;
        }
        std::string wildcard = "*";
        for (std::size_t i = labels.size() - take + 1; i < labels.size(); ++i) {
            wildcard += '.';
            wildcard += labels[i];
        }
        if (rules_.count(candidate) || (take >= 2 && rules_.count(wildcard))) {
            suffix_len = take;
        }
    }
    if (suffix_len == 0) suffix_len = 1;  // unlisted TLDs behave like "com"
    if (labels.size() <= suffix_len) return h;

    std::string out;
    for (std::size_t i = labels.size() - suffix_len - 1; i < labels.size(); ++i) {
        if (!out.empty()) out += '.';
        out += labels[i];
    }
    return out;
}

std::string registrable_domain(std::string_view host, const DomainRules* rules) {
    static const DomainRules heuristic;
    return (rules ? *rules : heuristic).registrable_domain(host);
}

std::string base_domain_of(std::string_view url, const DomainRules* rules) {
    auto parsed = parse_url(url);
    if (!parsed || parsed->host.empty()) return "";
    if (!parsed->scheme.empty() && !parsed->is_http()) return "";
    return registrable_domain(parsed->host, rules);
}

}  // namespace phishlens

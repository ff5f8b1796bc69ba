#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

namespace phishlens {

// Minimal URL decomposition, enough to classify link targets and drive the
// fetcher. Scheme and host are stored lowercased.
struct Url {
    std::string scheme;
    std::string host;
    std::string port;
    std::string path;
    std::string query;     // without '?'
    std::string fragment;  // without '#'
    bool has_authority = false;

    bool is_http() const { return scheme == "http" || scheme == "https"; }
    std::string authority() const { return port.empty() ? host : host + ":" + port; }
    std::string str() const;
};

std::optional<Url> parse_url(std::string_view input);

// RFC 3986 reference resolution, without dot-segment normalization beyond
// what link classification needs.
Url resolve_url(const Url& base, std::string_view reference);

// True when the href has no scheme and no authority (path/query/fragment
// only), i.e. it cannot leave the page's own host.
bool is_relative_reference(std::string_view href);

// Public-suffix rules. Without a loaded list the registrable domain falls
// back to the last two dot-separated labels.
class DomainRules {
  public:
    DomainRules() = default;
    static DomainRules from_file(const std::filesystem::path& psl_path);

    std::string registrable_domain(std::string_view host) const;
    bool has_rules() const { return !rules_.empty(); }

  private:
    std::unordered_set<std::string> rules_;       // "com", "co.uk", "*.ck"
    std::unordered_set<std::string> exceptions_;  // "!www.ck" without '!'
};

// Registrable domain of a bare host name (heuristic when rules is null).
// IP literals are returned unchanged.
std::string registrable_domain(std::string_view host, const DomainRules* rules = nullptr);

// Lowercased registrable domain of an absolute URL; empty when the URL is
// absent, unparseable, or not http(s).
std::string base_domain_of(std::string_view url, const DomainRules* rules = nullptr);

}  // namespace phishlens

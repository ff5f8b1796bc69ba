#include "phishlens/extractor.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "phishlens/html.hpp"
#include "phishlens/text.hpp"

namespace phishlens {

namespace {

using nlohmann::json;

// Link targets fall into three classes: ones that cannot leave the page's
// host, absolute web links, and non-web schemes (mailto:, javascript:, ...).
enum class TargetKind { relative, web_absolute, non_web };

struct LinkTarget {
    TargetKind kind = TargetKind::non_web;
    std::string domain;  // registrable domain for web_absolute
};

LinkTarget classify_target(std::string_view href, const DomainRules* rules) {
    auto parsed = parse_url(href);
    if (!parsed) return {TargetKind::non_web, ""};
    if (parsed->scheme.empty() && !parsed->has_authority) {
        return {TargetKind::relative, ""};
    }
    // Scheme-relative references inherit http(s) in this context.
    if (parsed->scheme.empty() || parsed->is_http()) {
        if (parsed->host.empty()) return {TargetKind::relative, ""};
        return {TargetKind::web_absolute, registrable_domain(parsed->host, rules)};
    }
    return {TargetKind::non_web, ""};
}

bool rel_contains_stylesheet(std::string_view rel) {
    std::string lower = to_lower(rel);
    std::size_t pos = 0;
    while (pos < lower.size()) {
        while (pos < lower.size() && is_ascii_space(lower[pos])) ++pos;
        std::size_t start = pos;
        while (pos < lower.size() && !is_ascii_space(lower[pos])) ++pos;
        if (lower.substr(start, pos - start) == "stylesheet") return true;
    }
    return false;
}

bool attr_contains_footer(const html::Node& node) {
    for (const char* name : {"id", "class"}) {
        if (const std::string* v = node.attr(name)) {
            if (to_lower(*v).find("footer") != std::string::npos) return true;
        }
    }
    return false;
}

bool has_nonempty_attr(const html::Node& node, std::string_view name) {
    const std::string* v = node.attr(name);
    return v && !v->empty();
}

// Link hrefs of all <a> descendants with a non-empty href.
std::vector<std::string> anchor_hrefs(const html::Node& root) {
    std::vector<std::string> hrefs;
    html::walk(root, [&](const html::Node& n) {
        if (n.is_element("a") && has_nonempty_attr(n, "href")) {
            hrefs.push_back(*n.attr("href"));
        }
    });
    return hrefs;
}

// Domain bucket used for the most-common-domain statistics: relative links
// count as the page's own domain.
std::optional<std::string> target_bucket(std::string_view href, std::string_view base_domain,
                                         const DomainRules* rules) {
    LinkTarget t = classify_target(href, rules);
    if (t.kind == TargetKind::relative) return std::string(base_domain);
    if (t.kind == TargetKind::web_absolute) return t.domain;
    return std::nullopt;
}

std::string most_common_domain(const std::vector<std::string>& hrefs,
                               std::string_view base_domain, const DomainRules* rules,
                               std::size_t* count_out) {
    std::map<std::string, std::size_t> counts;  // ordered: ties break lexicographically
    for (const auto& href : hrefs) {
        if (auto bucket = target_bucket(href, base_domain, rules)) {
            ++counts[*bucket];
        }
    }
    std::string best;
    std::size_t best_count = 0;
    for (const auto& [domain, count] : counts) {
        if (count > best_count) {
            best = domain;
            best_count = count;
        }
    }
    if (count_out) *count_out = best_count;
    return best;
}

bool visible_text_excluded(const std::string& tag) {
    return tag == "script" || tag == "style" || tag == "noscript" || tag == "template";
}

void collect_visible_text(const html::Node& node, bool excluded, std::string& out) {
    if (node.type == html::Node::Type::text) {
        if (!excluded) {
            if (!out.empty()) out.push_back(' ');
            out += node.text;
        }
        return;
    }
    bool child_excluded = excluded;
    if (node.type == html::Node::Type::element) {
        child_excluded = excluded || visible_text_excluded(node.tag);
    }
    for (const auto& child : node.children) {
        collect_visible_text(child, child_excluded, out);
    }
}

}  // namespace

std::array<double, FeatureRow::kNumericWidth> FeatureRow::numeric() const {
    return {static_cast<double>(hyperlink_count),
            static_cast<double>(internal_count),
            static_cast<double>(external_count),
            static_cast<double>(external_css_count),
            static_cast<double>(external_js_count),
            static_cast<double>(foreign_external_css),
            static_cast<double>(obfuscated_js_count),
            static_cast<double>(suspicious_form_link),
            common_page_ratio,
            static_cast<double>(common_page_footer),
            static_cast<double>(has_meta_description)};
}

namespace {

std::string title_from_dom(const html::Node& dom) {
    const html::Node* title = html::find_first(dom, "title");
    if (!title) return "";
    return collapse_whitespace(html::text_content(*title));
}

std::string content_from_dom(const html::Node& dom, std::size_t cap_chars) {
    std::string raw;
    collect_visible_text(dom, false, raw);
    return utf8_truncate(collapse_whitespace(raw), cap_chars);
}

HyperlinkCounts hyperlinks_from_dom(const html::Node& dom, std::string_view base_domain,
                                    const DomainRules* rules) {
    HyperlinkCounts counts;
    for (const auto& href : anchor_hrefs(dom)) {
        ++counts.total;
        LinkTarget t = classify_target(href, rules);
        if (t.kind == TargetKind::relative) {
            ++counts.internal;
        } else if (t.kind == TargetKind::web_absolute) {
            if (!base_domain.empty() && t.domain == base_domain) ++counts.internal;
            else ++counts.external;
        }
    }
    return counts;
}

CssJsCounts css_js_from_dom(const html::Node& dom, std::string_view base_domain,
                            const DomainRules* rules) {
    CssJsCounts counts;
    html::walk(dom, [&](const html::Node& n) {
        if (n.type != html::Node::Type::element) return;
        if (n.tag == "link") {
            const std::string* rel = n.attr("rel");
            if (rel && rel_contains_stylesheet(*rel) && has_nonempty_attr(n, "href")) {
                ++counts.external_css;
                LinkTarget t = classify_target(*n.attr("href"), rules);
                if (t.kind == TargetKind::web_absolute && t.domain != base_domain) {
                    ++counts.foreign_external_css;
                }
            }
        } else if (n.tag == "script") {
            if (has_nonempty_attr(n, "src")) {
                ++counts.external_js;
            } else {
                std::string body = html::text_content(n);
                if (body.find_first_not_of(" \t\r\n\f\v") != std::string::npos &&
                    is_obfuscated_script(body)) {
                    ++counts.obfuscated_js;
                }
            }
        }
    });
    return counts;
}

std::uint8_t form_from_dom(const html::Node& dom, std::string_view base_domain,
                           const DomainRules* rules) {
    std::uint8_t suspicious = 0;
    html::walk(dom, [&](const html::Node& n) {
        if (suspicious || !n.is_element("form")) return;
        bool has_password = false;
        html::walk(n, [&](const html::Node& input) {
            if (!input.is_element("input")) return;
            const std::string* type = input.attr("type");
            if (type && to_lower(*type) == "password") has_password = true;
        });
        if (!has_password) return;

        const std::string* action = n.attr("action");
        if (!action || action->empty() || *action == "#") {
            suspicious = 1;
            return;
        }
        auto parsed = parse_url(*action);
        if (parsed && parsed->scheme == "javascript") {
            suspicious = 1;
            return;
        }
        LinkTarget t = classify_target(*action, rules);
        if (t.kind == TargetKind::web_absolute && t.domain != base_domain) {
            suspicious = 1;
        }
    });
    return suspicious;
}

StructureFeatures structure_from_dom(const html::Node& dom, std::string_view base_domain,
                                     const DomainRules* rules) {
    StructureFeatures out;
    const std::vector<std::string> hrefs = anchor_hrefs(dom);

    std::size_t common_count = 0;
    std::string common = most_common_domain(hrefs, base_domain, rules, &common_count);
    if (!hrefs.empty() && common_count > 0) {
        out.common_page_ratio =
            static_cast<double>(common_count) / static_cast<double>(hrefs.size());
    }

    if (common_count > 0) {
        html::walk(dom, [&](const html::Node& n) {
            if (out.common_page_footer || n.type != html::Node::Type::element) return;
            if (n.tag != "footer" && !attr_contains_footer(n)) return;
            for (const auto& href : anchor_hrefs(n)) {
                auto bucket = target_bucket(href, base_domain, rules);
                if (bucket && *bucket == common) {
                    out.common_page_footer = 1;
                    return;
                }
            }
        });
    }

    html::walk(dom, [&](const html::Node& n) {
        if (out.has_meta_description || !n.is_element("meta")) return;
        const std::string* name = n.attr("name");
        if (!name || to_lower(*name) != "description") return;
        const std::string* content = n.attr("content");
        if (content && content->find_first_not_of(" \t\r\n\f\v") != std::string::npos) {
            out.has_meta_description = 1;
        }
    });
    return out;
}

}  // namespace

bool is_obfuscated_script(std::string_view body) {
    static constexpr std::string_view kTokens[] = {"eval(", "unescape(",
                                                   "String.fromCharCode(", "atob("};
    for (auto token : kTokens) {
        if (body.find(token) != std::string_view::npos) return true;
    }
    std::size_t line_start = 0;
    while (line_start <= body.size()) {
        std::size_t nl = body.find('\n', line_start);
        std::size_t len = (nl == std::string_view::npos ? body.size() : nl) - line_start;
        if (len > 1000) return true;
        if (nl == std::string_view::npos) break;
        line_start = nl + 1;
    }
    return shannon_entropy(body) > 5.0;
}

std::string extract_title(std::string_view html_text) {
    return title_from_dom(html::parse(html_text));
}

std::string extract_content(std::string_view html_text, std::size_t cap_chars) {
    return content_from_dom(html::parse(html_text), cap_chars);
}

HyperlinkCounts hyperlink_features(std::string_view html_text, std::string_view base_domain,
                                   const DomainRules* rules) {
    return hyperlinks_from_dom(html::parse(html_text), base_domain, rules);
}

CssJsCounts css_js_features(std::string_view html_text, std::string_view base_domain,
                            const DomainRules* rules) {
    return css_js_from_dom(html::parse(html_text), base_domain, rules);
}

std::uint8_t form_feature(std::string_view html_text, std::string_view base_domain,
                          const DomainRules* rules) {
    return form_from_dom(html::parse(html_text), base_domain, rules);
}

StructureFeatures structure_features(std::string_view html_text, std::string_view base_domain,
                                     const DomainRules* rules) {
    return structure_from_dom(html::parse(html_text), base_domain, rules);
}

FeatureRow extract_all(const LabeledDocument& doc, std::size_t cap_chars,
                       const DomainRules* rules) {
    const html::Node dom = html::parse(doc.html);
    const std::string& base = doc.base_domain;

    FeatureRow row;
    row.id = doc.id;
    row.label = doc.label;
    row.page_title = title_from_dom(dom);
    row.page_content = content_from_dom(dom, cap_chars);

    const HyperlinkCounts links = hyperlinks_from_dom(dom, base, rules);
    row.hyperlink_count = links.total;
    row.internal_count = links.internal;
    row.external_count = links.external;

    const CssJsCounts cssjs = css_js_from_dom(dom, base, rules);
    row.external_css_count = cssjs.external_css;
    row.external_js_count = cssjs.external_js;
    row.foreign_external_css = cssjs.foreign_external_css;
    row.obfuscated_js_count = cssjs.obfuscated_js;

    row.suspicious_form_link = form_from_dom(dom, base, rules);

    const StructureFeatures structure = structure_from_dom(dom, base, rules);
    row.common_page_ratio = structure.common_page_ratio;
    row.common_page_footer = structure.common_page_footer;
    row.has_meta_description = structure.has_meta_description;
    return row;
}

std::vector<FeatureRow> extract_corpus(const std::vector<LabeledDocument>& docs,
                                       std::size_t cap_chars, unsigned jobs,
                                       const DomainRules* rules) {
    std::vector<FeatureRow> rows(docs.size());
    if (jobs <= 1 || docs.size() < 2) {
        for (std::size_t i = 0; i < docs.size(); ++i) {
            rows[i] = extract_all(docs[i], cap_chars, rules);
        }
        return rows;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= docs.size()) return;
            rows[i] = extract_all(docs[i], cap_chars, rules);
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(jobs, std::thread::hardware_concurrency() * 2 + 2);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return rows;
}

void save_features(const std::vector<FeatureRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write feature file: " + path.string());
    for (const auto& row : rows) {
        json record;
        record["id"] = row.id;
        record["page_title"] = row.page_title;
        record["page_content"] = row.page_content;
        record["hyperlink_count"] = row.hyperlink_count;
        record["internal_count"] = row.internal_count;
        record["external_count"] = row.external_count;
        record["external_css_count"] = row.external_css_count;
        record["external_js_count"] = row.external_js_count;
        record["foreign_external_css"] = row.foreign_external_css;
        record["obfuscated_js_count"] = row.obfuscated_js_count;
        record["suspicious_form_link"] = row.suspicious_form_link;
        record["common_page_ratio"] = row.common_page_ratio;
        record["common_page_footer"] = row.common_page_footer;
        record["has_meta_description"] = row.has_meta_description;
        record["label"] = std::string(to_string(row.label));
        out << record.dump() << '\n';
    }
    if (!out) throw std::runtime_error("failed writing feature file: " + path.string());
}

std::vector<FeatureRow> load_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature file: " + path.string());
    std::vector<FeatureRow> rows;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> void {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) fail("malformed feature record");
        FeatureRow row;
        try {
            row.id = record.at("id").get<std::string>();
            row.page_title = record.at("page_title").get<std::string>();
            row.page_content = record.at("page_content").get<std::string>();
            row.hyperlink_count = record.at("hyperlink_count").get<std::uint32_t>();
            row.internal_count = record.at("internal_count").get<std::uint32_t>();
            row.external_count = record.at("external_count").get<std::uint32_t>();
            row.external_css_count = record.at("external_css_count").get<std::uint32_t>();
            row.external_js_count = record.at("external_js_count").get<std::uint32_t>();
            row.foreign_external_css = record.at("foreign_external_css").get<std::uint32_t>();
            row.obfuscated_js_count = record.at("obfuscated_js_count").get<std::uint32_t>();
            row.suspicious_form_link = record.at("suspicious_form_link").get<std::uint8_t>();
            row.common_page_ratio = record.at("common_page_ratio").get<double>();
            row.common_page_footer = record.at("common_page_footer").get<std::uint8_t>();
            row.has_meta_description = record.at("has_meta_description").get<std::uint8_t>();
            auto label = label_from_string(record.at("label").get<std::string>());
            if (!label) fail("unknown label");
            row.label = *label;
        } catch (const json::exception& e) {
            fail(std::string("bad feature record: ") + e.what());
        }
        if (row.id.empty()) fail("empty id");
        if (!seen.insert(row.id).second) fail("duplicate id \"" + row.id + "\"");
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace phishlens

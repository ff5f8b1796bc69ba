#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phishlens/corpus.hpp"
#include "phishlens/url.hpp"

namespace phishlens {

// One extracted page: two text fields and eleven numeric fields, in the
// fixed order the tabular network consumes them.
struct FeatureRow {
    std::string id;
    std::string page_title;
    std::string page_content;
    std::uint32_t hyperlink_count = 0;
    std::uint32_t internal_count = 0;
    std::uint32_t external_count = 0;
    std::uint32_t external_css_count = 0;
    std::uint32_t external_js_count = 0;
    std::uint32_t foreign_external_css = 0;
    std::uint32_t obfuscated_js_count = 0;
    std::uint8_t suspicious_form_link = 0;
    double common_page_ratio = 0.0;
    std::uint8_t common_page_footer = 0;
    std::uint8_t has_meta_description = 0;
    Label label = Label::benign;

    static constexpr std::size_t kNumericWidth = 11;
    std::array<double, kNumericWidth> numeric() const;
};

inline constexpr std::size_t kDefaultContentCap = 10000;

std::string extract_title(std::string_view html_text);
std::string extract_content(std::string_view html_text, std::size_t cap_chars);

struct HyperlinkCounts {
    std::uint32_t total = 0;
    std::uint32_t internal = 0;
    std::uint32_t external = 0;
};
HyperlinkCounts hyperlink_features(std::string_view html_text, std::string_view base_domain,
                                   const DomainRules* rules = nullptr);

struct CssJsCounts {
    std::uint32_t external_css = 0;
    std::uint32_t external_js = 0;
    std::uint32_t foreign_external_css = 0;
    std::uint32_t obfuscated_js = 0;
};
CssJsCounts css_js_features(std::string_view html_text, std::string_view base_domain,
                            const DomainRules* rules = nullptr);

std::uint8_t form_feature(std::string_view html_text, std::string_view base_domain,
                          const DomainRules* rules = nullptr);

struct StructureFeatures {
    double common_page_ratio = 0.0;
    std::uint8_t common_page_footer = 0;
    std::uint8_t has_meta_description = 0;
};
StructureFeatures structure_features(std::string_view html_text, std::string_view base_domain,
                                     const DomainRules* rules = nullptr);

// Inline-script obfuscation predicate: suspicious call tokens, a single line
// longer than 1000 bytes, or byte entropy above 5 bits.
bool is_obfuscated_script(std::string_view body);

FeatureRow extract_all(const LabeledDocument& doc, std::size_t cap_chars = kDefaultContentCap,
                       const DomainRules* rules = nullptr);

// Corpus-level extraction; with jobs > 1 documents are processed in
// parallel, output order stays the document order.
std::vector<FeatureRow> extract_corpus(const std::vector<LabeledDocument>& docs,
                                       std::size_t cap_chars = kDefaultContentCap,
                                       unsigned jobs = 1, const DomainRules* rules = nullptr);

// One JSON object per line, fields exactly as in FeatureRow plus id.
void save_features(const std::vector<FeatureRow>& rows, const std::filesystem::path& path);
std::vector<FeatureRow> load_features(const std::filesystem::path& path);

}  // namespace phishlens

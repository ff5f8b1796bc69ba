#include "phishlens/html.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>

#include "phishlens/text.hpp"

namespace phishlens::html {

namespace {

constexpr std::size_t kMaxDepth = 256;

bool is_void_element(std::string_view tag) {
    static const char* kVoid[] = {"area", "base",  "basefont", "br",   "col",  "embed",
                                  "hr",   "img",   "input",    "link", "meta", "param",
                                  "source", "track", "wbr"};
    return std::any_of(std::begin(kVoid), std::end(kVoid),
                       [&](const char* v) { return tag == v; });
}

// Content is raw character data; only the matching end tag terminates it.
bool is_rawtext_element(std::string_view tag) {
    return tag == "script" || tag == "style" || tag == "textarea" || tag == "title" ||
           tag == "xmp" || tag == "noscript";
}

// Opening one of these implicitly closes an open element of the same name.
bool self_nesting_closes(std::string_view tag) {
    static const char* kTags[] = {"p", "li", "option", "tr", "td", "th", "dd", "dt"};
    return std::any_of(std::begin(kTags), std::end(kTags),
                       [&](const char* v) { return tag == v; });
}

bool is_name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '-' || c == '_' || c == ':' || c == '.';
}

const std::unordered_map<std::string_view, std::uint32_t>& named_entities() {
    static const std::unordered_map<std::string_view, std::uint32_t> map = {
        {"amp", '&'},    {"lt", '<'},     {"gt", '>'},     {"quot", '"'},
        {"apos", '\''},  {"nbsp", 0xA0},  {"copy", 0xA9},  {"reg", 0xAE},
        {"trade", 0x2122}, {"hellip", 0x2026}, {"mdash", 0x2014}, {"ndash", 0x2013},
        {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D},
        {"laquo", 0xAB}, {"raquo", 0xBB}, {"middot", 0xB7}, {"bull", 0x2022},
        {"deg", 0xB0},   {"plusmn", 0xB1}, {"times", 0xD7}, {"divide", 0xF7},
        {"cent", 0xA2},  {"pound", 0xA3}, {"euro", 0x20AC}, {"yen", 0xA5},
        {"sect", 0xA7},  {"para", 0xB6},  {"shy", 0xAD},
    };
    return map;
}

struct Parser {
    std::string_view input;
    std::size_t pos = 0;

    bool at_end() const { return pos >= input.size(); }
    char peek(std::size_t ahead = 0) const {
        return pos + ahead < input.size() ? input[pos + ahead] : '\0';
    }
    bool starts_with_ci(std::string_view prefix) const {
        if (pos + prefix.size() > input.size()) return false;
        for (std::size_t i = 0; i < prefix.size(); ++i) {
            if (ascii_lower(input[pos + i]) != ascii_lower(prefix[i])) return false;
        }
        return true;
    }

    Node parse_document() {
        Node doc;
        std::vector<Node*> stack{&doc};

        auto open_of = [&](std::string_view tag) -> std::size_t {
            for (std::size_t i = stack.size(); i-- > 1;) {
                if (stack[i]->tag == tag) return i;
            }
            return 0;
        };

        std::string pending_text;
        auto flush_text = [&] {
            if (pending_text.empty()) return;
            Node t;
            t.type = Node::Type::text;
            t.text = decode_entities(pending_text);
            stack.back()->children.push_back(std::move(t));
            pending_text.clear();
        };

        while (!at_end()) {
            if (peek() != '<') {
                auto next = input.find('<', pos);
                if (next == std::string_view::npos) next = input.size();
                pending_text.append(input.substr(pos, next - pos));
                pos = next;
                continue;
            }
            // '<' seen; decide what kind of markup follows.
            if (starts_with_ci("<!--")) {
                flush_text();
                pos += 4;
                auto end = input.find("-->", pos);
                Node c;
                c.type = Node::Type::comment;
                c.text = std::string(
                    input.substr(pos, end == std::string_view::npos ? end : end - pos));
                stack.back()->children.push_back(std::move(c));
                pos = (end == std::string_view::npos) ? input.size() : end + 3;
                continue;
            }
            if (peek(1) == '!' || peek(1) == '?') {
                // doctype, CDATA and processing instructions are skipped
                flush_text();
                auto end = input.find('>', pos);
                pos = (end == std::string_view::npos) ? input.size() : end + 1;
                continue;
            }
            if (peek(1) == '/') {
                flush_text();
                pos += 2;
                std::string tag = read_tag_name();
                auto gt = input.find('>', pos);
                pos = (gt == std::string_view::npos) ? input.size() : gt + 1;
                if (tag.empty()) continue;
                if (auto idx = open_of(tag); idx > 0) {
                    stack.resize(idx);  // closes intervening unclosed elements
                }
                continue;
            }
            if (!is_name_char(peek(1))) {
                // Stray '<' in text.
                pending_text.push_back('<');
                ++pos;
                continue;
            }

            flush_text();
            ++pos;  // '<'
            Node el;
            el.type = Node::Type::element;
            el.tag = read_tag_name();
            bool self_closing = read_attributes(el);

            if (self_nesting_closes(el.tag)) {
                if (auto idx = open_of(el.tag); idx > 0) stack.resize(idx);
            }

            const bool rawtext = is_rawtext_element(el.tag);
            if (rawtext && !self_closing) {
                read_rawtext_child(el);
                stack.back()->children.push_back(std::move(el));
                continue;
            }
            if (self_closing || is_void_element(el.tag)) {
                stack.back()->children.push_back(std::move(el));
                continue;
            }
            stack.back()->children.push_back(std::move(el));
            if (stack.size() < kMaxDepth) {
                stack.push_back(&stack.back()->children.back());
            }
        }
        flush_text();
        return doc;
    }

    std::string read_tag_name() {
        std::string name;
        while (!at_end() && is_name_char(peek())) {
            name.push_back(ascii_lower(input[pos]));
            ++pos;
        }
        return name;
    }

    // Returns true when the tag ends with "/>".
    bool read_attributes(Node& el) {
        while (!at_end()) {
            while (!at_end() && (is_ascii_space(peek()) || peek() == '/')) {
                if (peek() == '/' && peek(1) == '>') {
                    pos += 2;
                    return true;
                }
                ++pos;
            }
            if (at_end()) return false;
            if (peek() == '>') {
                ++pos;
                return false;
            }
            std::string name;
            while (!at_end() && peek() != '=' && peek() != '>' && peek() != '/' &&
                   !is_ascii_space(peek())) {
                name.push_back(ascii_lower(input[pos]));
                ++pos;
            }
            while (!at_end() && is_ascii_space(peek())) ++pos;
            std::string value;
            if (peek() == '=') {
                ++pos;
                while (!at_end() && is_ascii_space(peek())) ++pos;
                if (peek() == '"' || peek() == '\'') {
                    char q = peek();
                    ++pos;
                    auto end = input.find(q, pos);
                    if (end == std::string_view::npos) end = input.size();
                    value = decode_entities(input.substr(pos, end - pos));
                    pos = std::min(end + 1, input.size());
                } else {
                    std::size_t start = pos;
                    while (!at_end() && !is_ascii_space(peek()) && peek() != '>') ++pos;
                    value = decode_entities(input.substr(start, pos - start));
                }
            }
            if (!name.empty() && !el.attr(name)) {
                el.attrs.emplace_back(std::move(name), std::move(value));
            }
        }
        return false;
    }

    void read_rawtext_child(Node& el) {
        // Scan for "</tag" (case-insensitive); EOF closes the element.
        std::size_t start = pos;
        std::size_t body_end = input.size();
        std::size_t resume = input.size();
        std::string needle = "</" + el.tag;
        for (std::size_t i = pos; i + needle.size() <= input.size(); ++i) {
            if (input[i] != '<' || input[i + 1] != '/') continue;
            bool match = true;
            for (std::size_t k = 2; k < needle.size(); ++k) {
                if (ascii_lower(input[i + k]) != needle[k]) {
                    match = false;
                    break;
                }
            }
            if (!match) continue;
            char after = (i + needle.size() < input.size()) ? input[i + needle.size()] : '>';
            if (is_name_char(after)) continue;
            body_end = i;
            auto gt = input.find('>', i);
            resume = (gt == std::string_view::npos) ? input.size() : gt + 1;
            break;
        }
        std::string_view body = input.substr(start, body_end - start);
        pos = resume;
        if (body.empty()) return;
        Node t;
        t.type = Node::Type::text;
        // script/style bodies stay verbatim; RCDATA elements decode entities
        t.text = (el.tag == "script" || el.tag == "style")
                     ? std::string(body)
                     : decode_entities(body);
        el.children.push_back(std::move(t));
    }
};

}  // namespace

const std::string* Node::attr(std::string_view name) const {
    for (const auto& [k, v] : attrs) {
        if (k == name) return &v;
    }
    return nullptr;
}

std::string decode_entities(std::string_view s) {
    if (s.find('&') == std::string_view::npos) return std::string(s);
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            ++i;
            continue;
        }
        std::size_t semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 32) {
            out.push_back('&');
            ++i;
            continue;
        }
        std::string_view body = s.substr(i + 1, semi - i - 1);
        if (body.size() >= 2 && body[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = true;
            if (body[1] == 'x' || body[1] == 'X') {
                if (body.size() < 3) ok = false;
                for (std::size_t k = 2; ok && k < body.size(); ++k) {
                    char c = ascii_lower(body[k]);
                    if (c >= '0' && c <= '9') cp = cp * 16 + (c - '0');
                    else if (c >= 'a' && c <= 'f') cp = cp * 16 + (c - 'a' + 10);
                    else ok = false;
                    if (cp > 0x10FFFF) cp = 0x110000;
                }
            } else {
                for (std::size_t k = 1; ok && k < body.size(); ++k) {
                    if (body[k] >= '0' && body[k] <= '9') cp = cp * 10 + (body[k] - '0');
                    else ok = false;
                    if (cp > 0x10FFFF) cp = 0x110000;
                }
            }
            if (ok) {
                append_utf8(out, cp);
                i = semi + 1;
                continue;
            }
        } else if (auto it = named_entities().find(body); it != named_entities().end()) {
            append_utf8(out, it->second);
            i = semi + 1;
            continue;
        }
        out.push_back('&');
        ++i;
    }
    return out;
}

Node parse(std::string_view input) {
    Parser p{input};
    return p.parse_document();
}

void walk(const Node& root, const std::function<void(const Node&)>& visit) {
    std::vector<const Node*> stack{&root};
    while (!stack.empty()) {
        const Node* n = stack.back();
        stack.pop_back();
        visit(*n);
        for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
            stack.push_back(&*it);
        }
    }
}

const Node* find_first(const Node& root, std::string_view tag) {
    const Node* found = nullptr;
    std::vector<const Node*> stack{&root};
    while (!stack.empty() && !found) {
        const Node* n = stack.back();
        stack.pop_back();
        if (n->is_element(tag)) {
            found = n;
            break;
        }
        for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
            stack.push_back(&*it);
        }
    }
    return found;
}

std::string text_content(const Node& root) {
    std::string out;
    walk(root, [&](const Node& n) {
        if (n.type == Node::Type::text) out += n.text;
    });
    return out;
}

}  // namespace phishlens::html

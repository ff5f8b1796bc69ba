#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phishlens::html {

// Error-recovering HTML parser. It tolerates any byte sequence: unclosed
// tags, stray end tags, bogus markup and binary garbage all produce a tree
// instead of a failure. Tag and attribute names are lowercased; character
// references in text and attribute values are decoded.

struct Node {
    enum class Type { document, element, text, comment };

    Type type = Type::document;
    std::string tag;   // elements only, lowercase
    std::string text;  // text/comment content
    std::vector<std::pair<std::string, std::string>> attrs;  // first occurrence wins
    std::vector<Node> children;

    bool is_element(std::string_view name) const {
        return type == Type::element && tag == name;
    }
    // nullptr when the attribute is absent; name must be lowercase.
    const std::string* attr(std::string_view name) const;
};

Node parse(std::string_view input);

// Depth-first pre-order visit of every node (iterative, safe for deep trees).
void walk(const Node& root, const std::function<void(const Node&)>& visit);

// First element with the given lowercase tag in document order.
const Node* find_first(const Node& root, std::string_view tag);

// Concatenated text content of the subtree, in document order.
std::string text_content(const Node& root);

std::string decode_entities(std::string_view s);

}  // namespace phishlens::html

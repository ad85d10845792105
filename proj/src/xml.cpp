#include "xml.hpp"

#include "vanetsim/error.hpp"

#include <boost/property_tree/xml_parser.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace vanetsim::xml {

namespace {

constexpr std::string_view kAttributes = "<xmlattr>";

bool is_element(const std::string& key) { return key.empty() || key.front() != '<'; }

}  // namespace

Tree parse(std::string_view text, std::string_view source) {
    std::istringstream in{std::string(text)};
    Tree doc;
    try {
        boost::property_tree::read_xml(in, doc, boost::property_tree::xml_parser::no_comments);
    } catch (const boost::property_tree::xml_parser_error& e) {
        std::optional<int> line;
        if (e.line() > 0) line = static_cast<int>(e.line());
        throw ParseError(std::string(source) + ": malformed XML: " + e.message(), line);
    }
    return doc;
}

std::optional<std::string> Element::attr(std::string_view key) const {
    auto attrs = tree_->get_child_optional(Tree::path_type(std::string(kAttributes), '\0'));
    if (!attrs) return std::nullopt;
    auto value = attrs->get_child_optional(Tree::path_type(std::string(key), '\0'));
    if (!value) return std::nullopt;
    return value->data();
}

std::string Element::required(std::string_view key) const {
    auto value = attr(key);
    if (!value) fail("missing required attribute '" + std::string(key) + "'");
    return *value;
}

double Element::required_number(std::string_view key) const {
    return to_number(required(key), source_ + ": <" + name_ + "> attribute '" + std::string(key) + "'");
}

std::optional<double> Element::number(std::string_view key) const {
    auto value = attr(key);
    if (!value) return std::nullopt;
    return to_number(*value, source_ + ": <" + name_ + "> attribute '" + std::string(key) + "'");
}

long long Element::required_integer(std::string_view key) const {
    return to_integer(required(key), source_ + ": <" + name_ + "> attribute '" + std::string(key) + "'");
}

std::optional<long long> Element::integer(std::string_view key) const {
    auto value = attr(key);
    if (!value) return std::nullopt;
    return to_integer(*value, source_ + ": <" + name_ + "> attribute '" + std::string(key) + "'");
}

void Element::fail(const std::string& message) const {
    std::string where = source_ + ": <" + name_;
    if (auto id = attr("id")) where += " id=\"" + *id + "\"";
    throw SchemaError(where + ">: " + message);
}

void for_each(const Tree& doc, std::string_view name, std::string_view source,
              const std::function<void(const Element&)>& visit) {
    for (const auto& [key, child] : doc) {
        if (!is_element(key)) continue;
        if (key == name) {
            visit(Element(key, child, source));
            continue;
        }
        for (const auto& [inner_key, inner] : child) {
            if (inner_key == name) visit(Element(inner_key, inner, source));
        }
    }
}

std::string escape(std::string_view value) {
    std::string out;
    out.reserve(value.size());
    for (char c : value) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

double to_number(std::string_view text, const std::string& context) {
    // Attribute values may carry surrounding whitespace.
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
        throw SchemaError(context + ": not a finite number '" + std::string(text) + "'");
    }
    return value;
}

long long to_integer(std::string_view text, const std::string& context) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    long long value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw SchemaError(context + ": not an integer '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace vanetsim::xml

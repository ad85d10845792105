#pragma once

// Thin attribute-access layer over Boost.PropertyTree for the plain input files.

#include <boost/property_tree/ptree.hpp>

#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace vanetsim::xml {

using Tree = boost::property_tree::ptree;

/// Parses an XML document. Multiple top-level elements are accepted.
/// Throws ParseError with the parser's line number on malformed input.
Tree parse(std::string_view text, std::string_view source);

/// One element and the name it was found under, for diagnostics.
class Element {
public:
    Element(std::string_view name, const Tree& tree, std::string_view source)
        : name_(name), tree_(&tree), source_(source) {}

    std::string_view name() const { return name_; }
    const Tree& tree() const { return *tree_; }

    std::optional<std::string> attr(std::string_view key) const;
    std::string required(std::string_view key) const;

    double required_number(std::string_view key) const;
    std::optional<double> number(std::string_view key) const;
    long long required_integer(std::string_view key) const;
    std::optional<long long> integer(std::string_view key) const;

    /// SchemaError prefixed with the source and element name.
    [[noreturn]] void fail(const std::string& message) const;

private:
    std::string name_;
    const Tree* tree_;
    std::string source_;
};

/// Visits every element named `name`, whether at top level or one level
/// below a wrapping root element (`<nodes>`, `<routes>`, ...), in document order.
void for_each(const Tree& doc, std::string_view name, std::string_view source,
              const std::function<void(const Element&)>& visit);

/// Escapes a value for use inside a double-quoted attribute.
std::string escape(std::string_view value);

double to_number(std::string_view text, const std::string& context);
long long to_integer(std::string_view text, const std::string& context);

}  // namespace vanetsim::xml

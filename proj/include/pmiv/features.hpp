#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmiv/ast.hpp"

namespace pmiv {

/// eta(s) = log10(max(1, |h|)) with h the FNV-1a 64 digest of s read as a signed integer.
double hash_feature(std::string_view s);
/// The same clamp applied to a raw 64-bit hash value.
double hash_feature_from_digest(std::uint64_t digest);

enum class FeatureRule {
    ExpectedType,     // 1 when kind == target kind
    HashedAttribute,  // eta(attribute) on the applicable kind
    NumericAttribute, // attribute value on the applicable kind
    ArgumentCount,    // #arguments on the applicable kind
    ReturnValue,      // value if numeric, 0 if a nested object / node reference
    Constant,         // constant on every node
    Custom,
};

/// A real-valued function on AST nodes; zero on every node of another kind.
struct FeatureFunction {
    std::string name;
    FeatureRule rule = FeatureRule::Constant;
    std::string applicable_kind = "*";
    bool kind_prefix = false; // applicable_kind matches as a prefix
    std::string attribute;
    double constant = 0.0;
    std::function<double(const AstNode&)> custom;

    bool applies_to(std::string_view kind) const;
    /// True when the function can never be negative (monotone antiderivatives).
    bool nonnegative() const;
};

/// Warnings raised while evaluating features (attribute present but of the wrong shape).
struct EvalStats {
    std::size_t warnings = 0;
};

double evaluate_function(const FeatureFunction& f, const AstNode& v, EvalStats* stats = nullptr);

FeatureFunction expected_type(std::string kind);
FeatureFunction constant_function(double c, std::string name = "Constant");

/// AddressOf ... LocalVar: the node kinds instantiated as ExpectedType features by default.
const std::vector<std::string>& default_expected_type_kinds();

/// One ExpectedType per kind, followed by the 19 attribute functions.
std::vector<FeatureFunction> default_catalog(std::span<const std::string> expected_type_kinds);
std::vector<FeatureFunction> default_catalog();

} // namespace pmiv

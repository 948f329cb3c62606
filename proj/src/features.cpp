#include "pmiv/features.hpp"

#include <algorithm>
#include <cmath>

#include "pmiv/hash.hpp"

namespace pmiv {

double hash_feature_from_digest(std::uint64_t digest)
{
    // |h| of the two's-complement reading, computed unsigned so INT64_MIN is safe.
    const bool negative = (digest >> 63) != 0;
    const std::uint64_t magnitude = negative ? ~digest + 1 : digest;
    return std::log10(std::max(1.0, static_cast<double>(magnitude)));
}

double hash_feature(std::string_view s) { return hash_feature_from_digest(fnv1a64(s)); }

bool FeatureFunction::applies_to(std::string_view kind) const
{
    if (applicable_kind == "*") {
        return true;
    }
    return kind_prefix ? kind.starts_with(applicable_kind) : kind == applicable_kind;
}

bool FeatureFunction::nonnegative() const
{
    switch (rule) {
    case FeatureRule::ExpectedType:
    case FeatureRule::HashedAttribute:
    case FeatureRule::ArgumentCount:
        return true;
    case FeatureRule::Constant:
        return constant >= 0.0;
    default:
        return false;
    }
}

double evaluate_function(const FeatureFunction& f, const AstNode& v, EvalStats* stats)
{
    auto warn = [stats] {
        if (stats != nullptr) {
            ++stats->warnings;
        }
        return 0.0;
    };
    if (f.rule == FeatureRule::ExpectedType) {
        return v.kind == f.applicable_kind ? 1.0 : 0.0;
    }
    if (!f.applies_to(v.kind)) {
        return 0.0;
    }
    const Json* attr = f.attribute.empty() ? nullptr : v.attribute(f.attribute);
    switch (f.rule) {
    case FeatureRule::ExpectedType:
        break;
    case FeatureRule::HashedAttribute:
        if (attr == nullptr) {
            return 0.0;
        }
        return attr->is_string() ? hash_feature(attr->get_ref<const std::string&>()) : warn();
    case FeatureRule::NumericAttribute:
        if (attr == nullptr) {
            return 0.0;
        }
        return attr->is_number() ? attr->get<double>() : warn();
    case FeatureRule::ArgumentCount:
        if (attr == nullptr) {
            return 0.0;
        }
        return attr->is_array() ? static_cast<double>(attr->size()) : warn();
    case FeatureRule::ReturnValue:
        if (attr == nullptr || attr->is_object() || attr->is_string()) {
            return 0.0; // nested expression, inline or by reference
        }
        return attr->is_number() ? attr->get<double>() : warn();
    case FeatureRule::Constant:
        return f.constant;
    case FeatureRule::Custom:
        return f.custom ? f.custom(v) : 0.0;
    }
    return 0.0;
}

FeatureFunction expected_type(std::string kind)
{
    FeatureFunction f;
    f.name = kind + "_ExpectedType";
    f.rule = FeatureRule::ExpectedType;
    f.applicable_kind = std::move(kind);
    return f;
}

FeatureFunction constant_function(double c, std::string name)
{
    FeatureFunction f;
    f.name = std::move(name);
    f.rule = FeatureRule::Constant;
    f.constant = c;
    return f;
}

const std::vector<std::string>& default_expected_type_kinds()
{
    static const std::vector<std::string> kinds = {
        "AddressOf", "Assignment", "BinaryOp",  "break",      "Call",           "ClassRef", "CLRArray",
        "continue",  "CtorCall",   "Dereference", "Entrypoint", "FieldReference", "FnPtrObj", "LocalVar",
    };
    return kinds;
}

std::vector<FeatureFunction> default_catalog(std::span<const std::string> expected_type_kinds)
{
    std::vector<FeatureFunction> catalog;
    for (const auto& kind : expected_type_kinds) {
        catalog.push_back(expected_type(kind));
    }
    auto add = [&](std::string name, FeatureRule rule, std::string kind, std::string attribute, bool prefix = false) {
        FeatureFunction f;
        f.name = std::move(name);
        f.rule = rule;
        f.applicable_kind = std::move(kind);
        f.attribute = std::move(attribute);
        f.kind_prefix = prefix;
        catalog.push_back(std::move(f));
    };
    using R = FeatureRule;
    add("CLRVariable", R::HashedAttribute, "CLRVariable", "varType", true);
    add("BinaryOp", R::HashedAttribute, "BinaryOp", "whichOpCode");
    add("CtorCallctorType", R::HashedAttribute, "CtorCall", "ctorType");
    add("FieldReference", R::HashedAttribute, "FieldReference", "fieldName");
    add("CLRLiteral", R::NumericAttribute, "CLRLiteral", "value");
    add("CallfnName", R::HashedAttribute, "Call", "fnName");
    add("CLRArrayelemType", R::HashedAttribute, "CLRArray", "elemType");
    add("FnPtrObjname", R::HashedAttribute, "FnPtrObj", "name");
    add("TypeTesttestedType", R::HashedAttribute, "TypeTest", "testedType");
    add("ClassRefname", R::HashedAttribute, "ClassRef", "name");
    add("TypeCast", R::HashedAttribute, "TypeCast", "castedType");
    add("CLRArraysize", R::HashedAttribute, "CLRArray", "elemType");
    add("NumPass2Call", R::ArgumentCount, "Call", "arguments");
    add("AddressOf", R::NumericAttribute, "AddressOf", "expr");
    add("ThrowOpexpr", R::NumericAttribute, "ThrowOp", "expr");
    add("UnaryOpexpr", R::NumericAttribute, "UnaryOp", "expr");
    add("StoreLocallocalIdx", R::NumericAttribute, "StoreLocal", "localIdx");
    add("StoreLocalvalue", R::NumericAttribute, "StoreLocal", "value");
    add("Returnvalue", R::ReturnValue, "Return", "value");
    return catalog;
}

std::vector<FeatureFunction> default_catalog() { return default_catalog(default_expected_type_kinds()); }

} // namespace pmiv

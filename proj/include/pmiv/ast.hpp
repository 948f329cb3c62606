#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pmiv {

using Json = nlohmann::json;

/// One decompiler AST node. `attributes` holds every member of the node's JSON
/// object except `type`, verbatim.
struct AstNode {
    std::string id;
    std::string kind;
    Json attributes = Json::object();

    const Json* attribute(std::string_view key) const;
    /// String-valued attribute, or nullopt when absent or not a string.
    std::optional<std::string> string_attribute(std::string_view key) const;
    /// Numeric attribute (integer or float), or nullopt.
    std::optional<double> number_attribute(std::string_view key) const;

    friend bool operator==(const AstNode&, const AstNode&) = default;
};

/// Returns the CLR operation name verbatim.
std::string_view node_kind(const AstNode& node) noexcept;

/// Control constructs shape execution order only; they never become graph vertices.
bool is_control_kind(std::string_view kind) noexcept;
/// Return / Throw / ThrowOp end a path outright.
bool is_terminator_kind(std::string_view kind) noexcept;

/// Keys whose values must name nodes of the same function (dangling ids are errors).
bool is_statement_key(std::string_view key) noexcept;
bool is_operand_key(std::string_view key) noexcept;
/// Keys whose string values are node references only when they name an existing node.
bool is_soft_reference_key(std::string_view key) noexcept;

/// Operand keys in evaluation order; operands are evaluated before their operator.
inline constexpr std::string_view kEvaluationOrder[] = {
    "target", "object", "left", "right", "operand", "index", "value", "expr", "arguments",
};

class AstDocument {
public:
    std::string function_name;
    std::map<std::string, AstNode> nodes; // ordered by id, lexicographically
    std::vector<std::string> entry_ids;

    bool empty() const noexcept { return nodes.empty(); }
    const AstNode* find(std::string_view id) const;
    const AstNode& at(std::string_view id) const;

    /// Ids of `node`'s operands in evaluation order (resolved references only).
    std::vector<std::string> operand_ids(const AstNode& node) const;
    /// Ids listed under a statement key (`then`, `body`, ...); empty when absent.
    std::vector<std::string> statement_ids(const AstNode& node, std::string_view key) const;

    friend bool operator==(const AstDocument&, const AstDocument&) = default;
};

struct CallEdge {
    std::string caller;
    std::string callee;

    friend bool operator==(const CallEdge&, const CallEdge&) = default;
    friend auto operator<=>(const CallEdge&, const CallEdge&) = default;
};

struct FileDocument {
    std::string file_id;
    std::vector<AstDocument> functions;
    /// Present only when the input carried an explicit call-graph section.
    std::optional<std::vector<CallEdge>> call_edges;

    friend bool operator==(const FileDocument&, const FileDocument&) = default;
};

/// Parses and validates one input document. Throws ParseError (malformed JSON
/// or wrong shape, with byte offset) and ValidationError (dangling ids,
/// reference cycles, malformed control constructs).
FileDocument parse_file_document(std::string_view bytes);
FileDocument file_document_from_json(const Json& root);

/// Parses one function object `{name, entry, nodes}`; `fallback_name` is used
/// when `name` is missing.
AstDocument function_from_json(const Json& fn, std::string_view fallback_name = {});

/// Validates an in-memory function (used by the parser and the corpus generator).
void validate(const AstDocument& doc);

Json to_json(const AstDocument& doc);
Json to_json(const FileDocument& doc);
/// Compact serialization; parse_file_document(serialize(d)) == d.
std::string serialize(const FileDocument& doc);

} // namespace pmiv

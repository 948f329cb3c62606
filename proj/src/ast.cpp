#include "pmiv/ast.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_map>

#include "pmiv/errors.hpp"

namespace pmiv {

namespace {

constexpr std::array<std::string_view, 7> kControlKinds = {
    "Block", "If", "While", "DoWhile", "For", "ForEach", "Switch",
};
constexpr std::array<std::string_view, 3> kTerminatorKinds = {"Return", "Throw", "ThrowOp"};
constexpr std::array<std::string_view, 9> kStatementKeys = {
    "statements", "then", "else", "body", "cases", "default", "init", "update", "condition",
};
constexpr std::array<std::string_view, 5> kOperandKeys = {"object", "left", "right", "operand", "index"};
constexpr std::array<std::string_view, 4> kSoftKeys = {"target", "value", "expr", "arguments"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& set, std::string_view s) noexcept
{
    return std::find(set.begin(), set.end(), s) != set.end();
}

bool needs_condition(std::string_view kind) noexcept
{
    return kind != "Block" && is_control_kind(kind);
}

/// Every (key, id) reference held by `node`, resolving soft keys against `doc`.
std::vector<std::pair<std::string, std::string>> references_of(const AstDocument& doc, const AstNode& node)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, value] : node.attributes.items()) {
        const bool strict = is_statement_key(key) || is_operand_key(key);
        const bool soft = is_soft_reference_key(key);
        if (!strict && !soft) {
            continue;
        }
        auto visit = [&](const Json& v) {
            if (!v.is_string()) {
                if (strict) {
                    throw ValidationError("node '" + node.id + "': attribute '" + key +
                                          "' must hold node ids");
                }
                return;
            }
            const auto& id = v.get_ref<const std::string&>();
            if (strict || doc.find(id) != nullptr) {
                out.emplace_back(key, id);
            }
        };
        if (value.is_array()) {
            for (const auto& v : value) {
                visit(v);
            }
        } else {
            visit(value);
        }
    }
    return out;
}

std::vector<std::string> id_list(const Json& value)
{
    std::vector<std::string> ids;
    if (value.is_string()) {
        ids.push_back(value.get<std::string>());
    } else if (value.is_array()) {
        for (const auto& v : value) {
            if (v.is_string()) {
                ids.push_back(v.get<std::string>());
            }
        }
    }
    return ids;
}

} // namespace

const Json* AstNode::attribute(std::string_view key) const
{
    auto it = attributes.find(key);
    return it == attributes.end() ? nullptr : &*it;
}

std::optional<std::string> AstNode::string_attribute(std::string_view key) const
{
    const Json* v = attribute(key);
    if (v == nullptr || !v->is_string()) {
        return std::nullopt;
    }
    return v->get<std::string>();
}

std::optional<double> AstNode::number_attribute(std::string_view key) const
{
    const Json* v = attribute(key);
    if (v == nullptr || !v->is_number()) {
        return std::nullopt;
    }
    return v->get<double>();
}

std::string_view node_kind(const AstNode& node) noexcept { return node.kind; }

bool is_control_kind(std::string_view kind) noexcept { return contains(kControlKinds, kind); }
bool is_terminator_kind(std::string_view kind) noexcept { return contains(kTerminatorKinds, kind); }
bool is_statement_key(std::string_view key) noexcept { return contains(kStatementKeys, key); }
bool is_operand_key(std::string_view key) noexcept { return contains(kOperandKeys, key); }
bool is_soft_reference_key(std::string_view key) noexcept { return contains(kSoftKeys, key); }

const AstNode* AstDocument::find(std::string_view id) const
{
    auto it = nodes.find(std::string(id));
    return it == nodes.end() ? nullptr : &it->second;
}

const AstNode& AstDocument::at(std::string_view id) const
{
    const AstNode* n = find(id);
    if (n == nullptr) {
        throw ValidationError("function '" + function_name + "': unknown node id '" + std::string(id) + "'");
    }
    return *n;
}

std::vector<std::string> AstDocument::operand_ids(const AstNode& node) const
{
    std::vector<std::string> ids;
    for (std::string_view key : kEvaluationOrder) {
        const Json* v = node.attribute(key);
        if (v == nullptr) {
            continue;
        }
        for (auto& id : id_list(*v)) {
            if (find(id) != nullptr) {
                ids.push_back(std::move(id));
            }
        }
    }
    return ids;
}

std::vector<std::string> AstDocument::statement_ids(const AstNode& node, std::string_view key) const
{
    const Json* v = node.attribute(key);
    return v == nullptr ? std::vector<std::string>{} : id_list(*v);
}

void validate(const AstDocument& doc)
{
    const std::string where = "function '" + doc.function_name + "': ";
    std::unordered_map<std::string, std::vector<std::string>> children;
    std::set<std::string> referenced;

    for (const auto& [id, node] : doc.nodes) {
        if (node.kind.empty()) {
            throw ValidationError(where + "node '" + id + "' has an empty type");
        }
        auto refs = references_of(doc, node);
        for (const auto& [key, target] : refs) {
            const AstNode* t = doc.find(target);
            if (t == nullptr) {
                throw ValidationError(where + "node '" + id + "' references missing node id '" + target + "'");
            }
            const bool needs_expression =
                key == "condition" || key == "init" || key == "update" || !is_statement_key(key);
            if (needs_expression && is_control_kind(t->kind)) {
                throw ValidationError(where + "node '" + id + "': '" + key + "' must reference an expression, not '" +
                                      t->kind + "'");
            }
            const bool jump = is_terminator_kind(t->kind) || t->kind == "break" || t->kind == "Break" ||
                              t->kind == "continue" || t->kind == "Continue";
            if ((key == "condition" || key == "init" || key == "update") && jump) {
                throw ValidationError(where + "node '" + id + "': '" + key + "' cannot be a jump ('" + t->kind + "')");
            }
            children[id].push_back(target);
            referenced.insert(target);
        }
        if (needs_condition(node.kind) && node.attribute("condition") == nullptr) {
            throw ValidationError(where + node.kind + " node '" + id + "' has no condition");
        }
        if (is_control_kind(node.kind) && node.attribute("condition") != nullptr &&
            id_list(*node.attribute("condition")).size() != 1) {
            throw ValidationError(where + "node '" + id + "': condition must be a single node id");
        }
    }
    for (const auto& id : doc.entry_ids) {
        if (doc.find(id) == nullptr) {
            throw ValidationError(where + "entry references missing node id '" + id + "'");
        }
    }

    // Reference graph must be acyclic: iterative three-colour DFS.
    enum class Mark : unsigned char { White, Grey, Black };
    std::unordered_map<std::string, Mark> mark;
    for (const auto& [root, unused] : doc.nodes) {
        if (mark[root] != Mark::White) {
            continue;
        }
        std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
        mark[root] = Mark::Grey;
        while (!stack.empty()) {
            auto& [id, next] = stack.back();
            const auto& kids = children[id];
            if (next == kids.size()) {
                mark[id] = Mark::Black;
                stack.pop_back();
                continue;
            }
            const std::string kid = kids[next++];
            Mark& m = mark[kid];
            if (m == Mark::Grey) {
                throw ValidationError(where + "reference cycle through node '" + kid + "'");
            }
            if (m == Mark::White) {
                m = Mark::Grey;
                stack.emplace_back(kid, 0);
            }
        }
    }
}

AstDocument function_from_json(const Json& fn, std::string_view fallback_name)
{
    if (!fn.is_object()) {
        throw ParseError("function entry must be a JSON object", 0);
    }
    AstDocument doc;
    if (auto it = fn.find("name"); it != fn.end()) {
        if (!it->is_string()) {
            throw ParseError("function name must be a string", 0);
        }
        doc.function_name = it->get<std::string>();
    } else {
        doc.function_name = std::string(fallback_name);
    }

    if (auto it = fn.find("nodes"); it != fn.end() && !it->is_null()) {
        if (!it->is_object()) {
            throw ParseError("function '" + doc.function_name + "': nodes must be an object", 0);
        }
        for (const auto& [id, body] : it->items()) {
            if (!body.is_object()) {
                throw ValidationError("function '" + doc.function_name + "': node '" + id + "' is not an object");
            }
            AstNode node;
            node.id = id;
            auto type = body.find("type");
            if (type == body.end() || !type->is_string()) {
                throw ValidationError("function '" + doc.function_name + "': node '" + id +
                                      "' has no string 'type'");
            }
            node.kind = type->get<std::string>();
            node.attributes = body;
            node.attributes.erase("type");
            doc.nodes.emplace(id, std::move(node));
        }
    }

    if (auto it = fn.find("entry"); it != fn.end()) {
        if (!it->is_array()) {
            throw ParseError("function '" + doc.function_name + "': entry must be an array", 0);
        }
        for (const auto& e : *it) {
            if (!e.is_string()) {
                throw ParseError("function '" + doc.function_name + "': entry ids must be strings", 0);
            }
            doc.entry_ids.push_back(e.get<std::string>());
        }
    } else {
        // Roots: nodes no other node refers to.
        std::set<std::string> referenced;
        for (const auto& [id, node] : doc.nodes) {
            for (const auto& [key, target] : references_of(doc, node)) {
                referenced.insert(target);
            }
        }
        for (const auto& [id, node] : doc.nodes) {
            if (!referenced.contains(id)) {
                doc.entry_ids.push_back(id);
            }
        }
    }

    validate(doc);
    return doc;
}

FileDocument file_document_from_json(const Json& root)
{
    if (!root.is_object()) {
        throw ParseError("document root must be a JSON object", 0);
    }
    FileDocument file;
    if (auto it = root.find("file_id"); it != root.end()) {
        if (!it->is_string()) {
            throw ParseError("file_id must be a string", 0);
        }
        file.file_id = it->get<std::string>();
    }
    if (auto it = root.find("functions"); it != root.end()) {
        if (!it->is_array()) {
            throw ParseError("functions must be an array", 0);
        }
        std::size_t index = 0;
        for (const auto& fn : *it) {
            file.functions.push_back(function_from_json(fn, "fn" + std::to_string(index++)));
        }
    }
    if (auto it = root.find("call_edges"); it != root.end()) {
        if (!it->is_array()) {
            throw ParseError("call_edges must be an array", 0);
        }
        std::vector<CallEdge> edges;
        for (const auto& e : *it) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
                throw ParseError("call_edges entries must be [caller, callee] string pairs", 0);
            }
            edges.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
        }
        file.call_edges = std::move(edges);
    }
    return file;
}

FileDocument parse_file_document(std::string_view bytes)
{
    Json root;
    try {
        root = Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
    }
    return file_document_from_json(root);
}

Json to_json(const AstDocument& doc)
{
    Json nodes = Json::object();
    for (const auto& [id, node] : doc.nodes) {
        Json body = node.attributes;
        body["type"] = node.kind;
        nodes[id] = std::move(body);
    }
    return Json{{"name", doc.function_name}, {"entry", doc.entry_ids}, {"nodes", std::move(nodes)}};
}

Json to_json(const FileDocument& doc)
{
    Json fns = Json::array();
    for (const auto& fn : doc.functions) {
        fns.push_back(to_json(fn));
    }
    Json root{{"file_id", doc.file_id}, {"functions", std::move(fns)}};
    if (doc.call_edges) {
        Json edges = Json::array();
        for (const auto& e : *doc.call_edges) {
            edges.push_back(Json::array({e.caller, e.callee}));
        }
        root["call_edges"] = std::move(edges);
    }
    return root;
}

std::string serialize(const FileDocument& doc) { return to_json(doc).dump(); }

} // namespace pmiv

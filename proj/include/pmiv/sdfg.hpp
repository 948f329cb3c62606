#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pmiv/ast.hpp"

namespace pmiv {

inline constexpr std::size_t kDefaultMaxPaths = 4096;

struct Edge {
    std::uint32_t source;
    std::uint32_t target;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Shortsighted data-flow graph of one function: the merge of every execution
/// path through its AST. Vertices are ordered by node id; edges are sorted and
/// unique.
struct Sdfg {
    std::string function_name;
    std::vector<AstNode> nodes;
    std::vector<Edge> edges;

    std::size_t size() const noexcept { return nodes.size(); }
    bool empty() const noexcept { return nodes.empty(); }
    std::size_t index_of(std::string_view id) const; // npos when absent

    friend bool operator==(const Sdfg&, const Sdfg&) = default;
};

struct PathEnumeration {
    std::vector<std::vector<std::string>> paths;
    bool truncated = false;
};

/// Every root-to-terminal execution path, loops unrolled once. Stops at
/// `max_paths` (>= 1) and flags truncation.
PathEnumeration enumerate_paths(const AstDocument& ast, std::size_t max_paths = kDefaultMaxPaths);

/// Number of paths enumerate_paths would produce, saturating at `cap + 1`.
std::size_t count_paths(const AstDocument& ast, std::size_t cap = kDefaultMaxPaths);

/// Merges a set of paths into a graph over `ast`'s nodes.
Sdfg merge_paths(const AstDocument& ast, const std::vector<std::vector<std::string>>& paths);

/// Emits the same edges as merge_paths(enumerate_paths(ast)) directly from the
/// AST structure, without enumerating paths.
Sdfg build_sdfg_structural(const AstDocument& ast);

struct SdfgBuild {
    Sdfg graph;
    bool used_structural_fallback = false;
};

/// Enumerates and merges paths; falls back to structural emission when the
/// path count exceeds `max_paths`.
SdfgBuild build_sdfg_checked(const AstDocument& ast, std::size_t max_paths = kDefaultMaxPaths);
Sdfg build_sdfg(const AstDocument& ast, std::size_t max_paths = kDefaultMaxPaths);

/// Graphviz dump, vertices labelled `id:kind`.
std::string to_dot(const Sdfg& g);

} // namespace pmiv

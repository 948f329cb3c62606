#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmiv/ast.hpp"
#include "pmiv/sdfg.hpp"

namespace pmiv {

/// "crypto", "aes", "rsa", "des", "sha", "md5", "rc4"
const std::vector<std::string>& default_crypto_substrings();

/// Per-file function call graph. Nodes are the file's functions in document
/// order followed by external-callee stubs in first-seen order.
struct CallGraph {
    std::vector<std::string> nodes;
    std::vector<Edge> edges; // sorted, unique
    std::vector<bool> crypto_flags;
    std::size_t internal_count = 0; // nodes[0, internal_count) are defined in the file
};

/// Uses the document's explicit call_edges when present; otherwise derives an
/// edge from every Call/CtorCall whose fnName equals a function of the file.
CallGraph build_call_graph(const FileDocument& doc,
                           const std::vector<std::string>& crypto_substrings = default_crypto_substrings());

struct FcgFeatures {
    double component_size_ratio = 0.0; // max(L) / min(L) over weak components
    double component_count = 0.0;
    double degree_mean = 0.0; // total (in + out) degree
    double degree_std = 0.0;  // population
    double vertex_count = 0.0;
    double edge_count = 0.0;
    double crypto_flag = 0.0;

    static constexpr std::size_t kCount = 7;
    std::vector<double> as_vector() const;
    static const std::vector<std::string>& names();
};

/// All-zero for a graph without nodes.
FcgFeatures call_graph_features(const CallGraph& g);

std::string to_dot(const CallGraph& g);

} // namespace pmiv

#include "pmiv/callgraph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace pmiv {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool mentions_crypto(std::string_view name, const std::vector<std::string>& needles)
{
    const std::string hay = lower(name);
    return std::any_of(needles.begin(), needles.end(),
                       [&](const std::string& n) { return !n.empty() && hay.find(lower(n)) != std::string::npos; });
}

bool is_call(std::string_view kind) { return kind == "Call" || kind == "CtorCall"; }

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x)
{
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

} // namespace

const std::vector<std::string>& default_crypto_substrings()
{
    static const std::vector<std::string> s = {"crypto", "aes", "rsa", "des", "sha", "md5", "rc4"};
    return s;
}

CallGraph build_call_graph(const FileDocument& doc, const std::vector<std::string>& crypto_substrings)
{
    CallGraph g;
    std::unordered_map<std::string, std::uint32_t> index;
    auto intern = [&](const std::string& name) {
        auto [it, inserted] = index.emplace(name, static_cast<std::uint32_t>(g.nodes.size()));
        if (inserted) {
            g.nodes.push_back(name);
            g.crypto_flags.push_back(mentions_crypto(name, crypto_substrings));
        }
        return it->second;
    };
    for (const auto& fn : doc.functions) {
        intern(fn.function_name);
    }
    g.internal_count = g.nodes.size();

    // Function bodies calling crypto-looking names flag their function.
    for (const auto& fn : doc.functions) {
        const std::uint32_t self = index.at(fn.function_name);
        for (const auto& [id, node] : fn.nodes) {
            if (node.kind != "Call") {
                continue;
            }
            if (auto callee = node.string_attribute("fnName"); callee && mentions_crypto(*callee, crypto_substrings)) {
                g.crypto_flags[self] = true;
            }
        }
    }

    if (doc.call_edges) {
        for (const auto& e : *doc.call_edges) {
            const std::uint32_t a = intern(e.caller);
            const std::uint32_t b = intern(e.callee);
            g.edges.push_back(Edge{a, b});
        }
    } else {
        for (const auto& fn : doc.functions) {
            const std::uint32_t self = index.at(fn.function_name);
            for (const auto& [id, node] : fn.nodes) {
                if (!is_call(node.kind)) {
                    continue;
                }
                auto callee = node.string_attribute("fnName");
                if (!callee) {
                    continue;
                }
                auto it = index.find(*callee);
                if (it != index.end() && it->second < g.internal_count) {
                    g.edges.push_back(Edge{self, it->second});
                }
            }
        }
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
}

std::vector<double> FcgFeatures::as_vector() const
{
    return {component_size_ratio, component_count, degree_mean, degree_std, vertex_count, edge_count, crypto_flag};
}

const std::vector<std::string>& FcgFeatures::names()
{
    static const std::vector<std::string> n = {
        "fcg_component_size_ratio", "fcg_component_count", "fcg_degree_mean", "fcg_degree_std",
        "fcg_vertex_count",         "fcg_edge_count",      "fcg_crypto_flag",
    };
    return n;
}

FcgFeatures call_graph_features(const CallGraph& g)
{
    FcgFeatures f;
    const std::size_t n = g.nodes.size();
    if (n == 0) {
        return f;
    }
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<double> degree(n, 0.0);
    for (const auto& e : g.edges) {
        degree[e.source] += 1.0;
        degree[e.target] += 1.0;
        const std::size_t a = find_root(parent, e.source);
        const std::size_t b = find_root(parent, e.target);
        if (a != b) {
            parent[std::max(a, b)] = std::min(a, b);
        }
    }
    std::unordered_map<std::size_t, std::size_t> sizes;
    for (std::size_t v = 0; v < n; ++v) {
        ++sizes[find_root(parent, v)];
    }
    std::size_t largest = 0;
    std::size_t smallest = n;
    for (const auto& [root, size] : sizes) {
        largest = std::max(largest, size);
        smallest = std::min(smallest, size);
    }
    f.component_count = static_cast<double>(sizes.size());
    f.component_size_ratio = static_cast<double>(largest) / static_cast<double>(smallest);

    const double mean = std::accumulate(degree.begin(), degree.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double d : degree) {
        var += (d - mean) * (d - mean);
    }
    f.degree_mean = mean;
    f.degree_std = std::sqrt(var / static_cast<double>(n));
    f.vertex_count = static_cast<double>(n);
    f.edge_count = static_cast<double>(g.edges.size());
    f.crypto_flag = std::any_of(g.crypto_flags.begin(), g.crypto_flags.end(), [](bool b) { return b; }) ? 1.0 : 0.0;
    return f;
}

std::string to_dot(const CallGraph& g)
{
    std::ostringstream os;
    os << "digraph callgraph {\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        os << "  n" << i << " [label=\"" << g.nodes[i] << "\"" << (i >= g.internal_count ? ", style=dashed" : "")
           << (g.crypto_flags[i] ? ", color=red" : "") << "];\n";
    }
    for (const auto& e : g.edges) {
        os << "  n" << e.source << " -> n" << e.target << ";\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace pmiv

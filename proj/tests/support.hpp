#pragma once

// Independent reference implementations and fixtures shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pmiv/ast.hpp"
#include "pmiv/random.hpp"
#include "pmiv/sdfg.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(PMIV_TEST_DATA_DIR) + "/" + name; }

inline std::string read_data(const std::string& name)
{
    std::ifstream in(data_path(name), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline pmiv::FileDocument load_data(const std::string& name) { return pmiv::parse_file_document(read_data(name)); }

/// Stationary vector of the dense smoothed chain, solved directly as the
/// linear system pi (I - M) = 0 with sum(pi) = 1 (Gaussian elimination with
/// partial pivoting). Dangling rows are uniform.
inline std::vector<double> dense_pagerank(std::size_t n, const std::vector<pmiv::Edge>& edges, double p)
{
    std::vector<std::vector<double>> t(n, std::vector<double>(n, 0.0));
    std::vector<std::size_t> out(n, 0);
    std::vector<std::vector<bool>> seen(n, std::vector<bool>(n, false));
    for (const auto& e : edges) {
        if (!seen[e.source][e.target]) {
            seen[e.source][e.target] = true;
            ++out[e.source];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (out[i] == 0) {
                t[i][j] = 1.0 / static_cast<double>(n);
            } else if (seen[i][j]) {
                t[i][j] = 1.0 / static_cast<double>(out[i]);
            }
        }
    }
    // Unknowns pi_j; equation j: sum_i pi_i M_ij - pi_j = 0, last row replaced by sum pi = 1.
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const double m = (1.0 - p) * t[i][j] + p / static_cast<double>(n);
            a[j][i] = m - (i == j ? 1.0 : 0.0);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        a[n - 1][i] = 1.0;
    }
    a[n - 1][n] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) {
                pivot = r;
            }
        }
        std::swap(a[col], a[pivot]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) {
                continue;
            }
            const double factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= n; ++c) {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    std::vector<double> pi(n);
    for (std::size_t i = 0; i < n; ++i) {
        pi[i] = a[i][n] / a[i][i];
    }
    return pi;
}

/// sum of f(v) p(v) over {v : p(v) <= q}, vertices visited in index order.
inline double filtered_sum(const std::vector<double>& p, const std::vector<double>& f, double q)
{
    double s = 0.0;
    for (std::size_t v = 0; v < p.size(); ++v) {
        if (p[v] <= q) {
            s += f[v] * p[v];
        }
    }
    return s;
}

/// Weak component sizes via a plain union-find.
inline std::vector<std::size_t> component_sizes(std::size_t n, const std::vector<pmiv::Edge>& edges)
{
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            x = parent[x];
        }
        return x;
    };
    for (const auto& e : edges) {
        parent[find(e.source)] = find(e.target);
    }
    std::vector<std::size_t> size(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++size[find(i)];
    }
    std::vector<std::size_t> out;
    for (auto s : size) {
        if (s > 0) {
            out.push_back(s);
        }
    }
    return out;
}

inline double norm_oracle(const std::vector<double>& a, const std::vector<double>& b, double p)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::pow(std::abs(a[i] - b[i]), p);
    }
    return std::pow(s, 1.0 / p);
}

inline std::vector<pmiv::Edge> random_digraph(pmiv::Rng& rng, std::size_t n, double density)
{
    std::vector<pmiv::Edge> edges;
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < n; ++j) {
            if (rng.chance(density)) {
                edges.push_back({i, j});
            }
        }
    }
    return edges;
}

template <class T>
void shuffle(pmiv::Rng& rng, std::vector<T>& xs)
{
    for (std::size_t i = xs.size(); i > 1; --i) {
        std::swap(xs[i - 1], xs[rng.below(i)]);
    }
}

/// Random well-formed function exercising every control construct.
class RandomAst {
public:
    RandomAst(pmiv::Rng& rng, std::size_t budget) : rng_(rng), budget_(budget) {}

    pmiv::AstDocument build()
    {
        doc_.function_name = "random";
        doc_.entry_ids = block(0, false);
        pmiv::validate(doc_);
        return std::move(doc_);
    }

private:
    std::string add(std::string kind, pmiv::Json attrs = pmiv::Json::object())
    {
        const std::string id = "n" + std::to_string(1000 + doc_.nodes.size());
        doc_.nodes.emplace(id, pmiv::AstNode{id, std::move(kind), std::move(attrs)});
        return id;
    }

    std::string expression(std::size_t depth)
    {
        if (depth >= 2 || rng_.chance(0.5)) {
            return add(rng_.chance(0.5) ? "LocalVar" : "CLRLiteral");
        }
        pmiv::Json a{{"whichOpCode", "Add"}};
        a["left"] = expression(depth + 1);
        a["right"] = expression(depth + 1);
        return add("BinaryOp", std::move(a));
    }

    std::vector<std::string> block(std::size_t depth, bool in_loop)
    {
        std::vector<std::string> out;
        const auto n = rng_.between(depth == 0 ? 1 : 0, 3);
        for (std::int64_t i = 0; i < n && budget_ > 0; ++i) {
            --budget_;
            out.push_back(statement(depth, in_loop));
        }
        return out;
    }

    std::string statement(std::size_t depth, bool in_loop)
    {
        const auto r = rng_.below(depth >= 3 ? 3 : 11);
        switch (r) {
        case 0:
        case 1:
            return expression(0);
        case 2:
            if (in_loop && rng_.chance(0.5)) {
                return add(rng_.chance(0.5) ? "break" : "continue");
            }
            return add("Return", pmiv::Json{{"value", expression(1)}});
        case 3:
        case 4: {
            pmiv::Json a{{"condition", expression(0)}, {"then", block(depth + 1, in_loop)}};
            if (rng_.chance(0.5)) {
                a["else"] = block(depth + 1, in_loop);
            }
            return add("If", std::move(a));
        }
        case 5:
            return add("While", pmiv::Json{{"condition", expression(0)}, {"body", block(depth + 1, true)}});
        case 6:
            return add("DoWhile", pmiv::Json{{"condition", expression(0)}, {"body", block(depth + 1, true)}});
        case 7:
            return add("For", pmiv::Json{{"init", pmiv::Json::array({expression(0)})},
                                         {"condition", expression(0)},
                                         {"update", pmiv::Json::array({expression(0)})},
                                         {"body", block(depth + 1, true)}});
        case 8:
            return add("ForEach", pmiv::Json{{"condition", expression(0)}, {"body", block(depth + 1, true)}});
        case 9: {
            pmiv::Json cases = pmiv::Json::array();
            const auto k = rng_.between(1, 3);
            for (std::int64_t i = 0; i < k; ++i) {
                cases.push_back(add("Block", pmiv::Json{{"statements", block(depth + 1, true)}}));
            }
            pmiv::Json a{{"condition", expression(0)}, {"cases", cases}};
            if (rng_.chance(0.5)) {
                a["default"] = block(depth + 1, true);
            }
            return add("Switch", std::move(a));
        }
        default:
            return add("Block", pmiv::Json{{"statements", block(depth + 1, in_loop)}});
        }
    }

    pmiv::Rng& rng_;
    std::size_t budget_;
    pmiv::AstDocument doc_;
};

} // namespace testing

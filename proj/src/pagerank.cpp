#include "pmiv/pagerank.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pmiv/errors.hpp"

namespace pmiv {

TransitionMatrix::TransitionMatrix(std::size_t n, std::span<const Edge> edges) : rows_(n)
{
    if (n == 0) {
        throw DataError("transition matrix of an empty graph");
    }
    for (const auto& e : edges) {
        if (e.source >= n || e.target >= n) {
            throw DataError("edge endpoint out of range");
        }
        rows_[e.source].push_back(Entry{e.target, 0.0});
    }
    for (auto& row : rows_) {
        std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) { return a.column < b.column; });
        row.erase(std::unique(row.begin(), row.end(),
                              [](const Entry& a, const Entry& b) { return a.column == b.column; }),
                  row.end());
        const double p = row.empty() ? 0.0 : 1.0 / static_cast<double>(row.size());
        for (auto& entry : row) {
            entry.probability = p;
        }
    }
}

double TransitionMatrix::at(std::size_t i, std::size_t j) const
{
    const auto& row = rows_.at(i);
    if (row.empty()) {
        return 1.0 / static_cast<double>(rows_.size());
    }
    auto it = std::lower_bound(row.begin(), row.end(), j,
                               [](const Entry& e, std::size_t col) { return e.column < col; });
    return it != row.end() && it->column == j ? it->probability : 0.0;
}

TransitionMatrix transition_matrix(const Sdfg& g) { return TransitionMatrix(g.size(), g.edges); }

PageRankMeasure pagerank(std::size_t n, std::span<const Edge> edges, const PageRankOptions& options)
{
    const double p = options.transport;
    if (!(p > 0.0 && p < 1.0)) {
        throw DataError("transport probability must lie in (0, 1), got " + std::to_string(p));
    }
    const TransitionMatrix t(n, edges);
    const double inv_n = 1.0 / static_cast<double>(n);

    PageRankMeasure out;
    out.transport = p;
    std::vector<double> pi(n, inv_n);
    std::vector<double> next(n);
    out.residual = 0.0;
    // Constant p/n transport (sum(pi) still contracts to 1); keeps every entry >= p/n under rounding.
    const double floor = p / static_cast<double>(n);
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        double dangling = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (t.is_dangling(i)) {
                dangling += pi[i];
            }
        }
        const double base = floor + (1.0 - p) * dangling * inv_n;
        std::fill(next.begin(), next.end(), base);
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& e : t.row(i)) {
                next[e.column] += (1.0 - p) * pi[i] * e.probability;
            }
        }
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            change += std::abs(next[i] - pi[i]);
        }
        pi.swap(next);
        out.iterations_used = iter + 1;
        out.residual = change;
        if (change < options.tolerance) {
            break;
        }
    }
    if (out.residual > 1e-6) {
        throw DataError("PageRank did not converge (residual " + std::to_string(out.residual) + ")");
    }
    out.probabilities = std::move(pi);
    return out;
}

PageRankMeasure pagerank(const Sdfg& g, const PageRankOptions& options)
{
    return pagerank(g.size(), g.edges, options);
}

} // namespace pmiv

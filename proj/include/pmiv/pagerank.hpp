#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pmiv/sdfg.hpp"

namespace pmiv {

inline constexpr double kDefaultTransport = 0.15;

/// Row-stochastic random-walk matrix of a digraph. Row i spreads mass uniformly
/// over the out-neighbours of i; rows of vertices without out-edges are
/// replaced by the uniform row 1/n and stored implicitly.
class TransitionMatrix {
public:
    struct Entry {
        std::uint32_t column;
        double probability;
    };

    TransitionMatrix(std::size_t n, std::span<const Edge> edges);

    std::size_t dimension() const noexcept { return rows_.size(); }
    bool is_dangling(std::size_t row) const { return rows_[row].empty(); }
    /// Explicit entries of a non-dangling row, sorted by column.
    std::span<const Entry> row(std::size_t i) const { return rows_[i]; }
    double at(std::size_t i, std::size_t j) const;

private:
    std::vector<std::vector<Entry>> rows_;
};

TransitionMatrix transition_matrix(const Sdfg& g);

struct PageRankOptions {
    double transport = kDefaultTransport;
    double tolerance = 1e-10;
    std::size_t max_iterations = 200;
};

struct PageRankMeasure {
    std::vector<double> probabilities;
    double transport = kDefaultTransport;
    std::size_t iterations_used = 0;
    double residual = 0.0; // L1 change of the last iteration
};

/// Left-stationary vector of M = (1-p)T + pB by power iteration from the
/// uniform vector. Throws DataError for an empty graph, p outside (0,1), or a
/// final residual above 1e-6.
PageRankMeasure pagerank(std::size_t n, std::span<const Edge> edges, const PageRankOptions& options = {});
PageRankMeasure pagerank(const Sdfg& g, const PageRankOptions& options = {});

} // namespace pmiv

#pragma once

#include <span>
#include <string>
#include <vector>

#include "pmiv/sdfg.hpp"
#include "pmiv/vectorize.hpp"

namespace pmiv {

/// Coordinates E[f_i | G_{q_j}] in catalog-then-threshold order.
struct GraphVector {
    std::vector<double> values;
    std::string graph_id;
    std::string schema_hash;
};

/// Integrates the vectorizer's catalog over its partition against the PageRank
/// measure of g (the vectorizer's mode is ignored). Throws DataError on an empty graph.
GraphVector vectorize_graph(const Sdfg& g, const Vectorizer& vectorizer);

/// Lp distance (p >= 1) between coordinate vectors of equal length.
double lp_distance(std::span<const double> a, std::span<const double> b, double p = 2.0);

/// ||V(G) - V(H)||_p. Throws SchemaMismatch when the vectors come from
/// different feature spaces and DataError for p < 1.
double graph_similarity(const GraphVector& g, const GraphVector& h, double p = 2.0);

/// The same norm applied to file vectors.
double file_similarity(const FileVector& a, const FileVector& b, double p = 2.0);

} // namespace pmiv

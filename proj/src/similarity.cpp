#include "pmiv/similarity.hpp"

#include <cmath>

#include "pmiv/errors.hpp"

namespace pmiv {

GraphVector vectorize_graph(const Sdfg& g, const Vectorizer& vectorizer)
{
    if (g.empty()) {
        throw DataError("cannot vectorize an empty graph");
    }
    const auto& cfg = vectorizer.config();
    const PageRankMeasure mu = pagerank(g, PageRankOptions{.transport = cfg.transport_p});
    GraphVector out;
    out.graph_id = g.function_name;
    out.schema_hash = vectorizer.graph_schema_hash();
    for (const auto& f : vectorizer.catalog()) {
        const auto values =
            antiderivative_values(mu.probabilities, evaluate_on_graph(f, g), cfg.partition.thresholds());
        out.values.insert(out.values.end(), values.begin(), values.end());
    }
    return out;
}

double lp_distance(std::span<const double> a, std::span<const double> b, double p)
{
    if (!(p >= 1.0)) {
        throw DataError("Lp distance needs p >= 1");
    }
    if (a.size() != b.size()) {
        throw SchemaMismatch("vectors have different lengths");
    }
    double sum = 0.0;
    if (p == 1.0) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            sum += std::abs(a[i] - b[i]);
        }
        return sum;
    }
    if (p == 2.0) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            sum += d * d;
        }
        return std::sqrt(sum);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::pow(std::abs(a[i] - b[i]), p);
    }
    return std::pow(sum, 1.0 / p);
}

double graph_similarity(const GraphVector& g, const GraphVector& h, double p)
{
    if (g.schema_hash != h.schema_hash) {
        throw SchemaMismatch("graph vectors come from different schemas (" + g.schema_hash + " vs " + h.schema_hash +
                             ")");
    }
    return lp_distance(g.values, h.values, p);
}

double file_similarity(const FileVector& a, const FileVector& b, double p)
{
    if (a.schema_hash != b.schema_hash) {
        throw SchemaMismatch("file vectors come from different schemas (" + a.schema_hash + " vs " + b.schema_hash +
                             ")");
    }
    return lp_distance(a.values, b.values, p);
}

} // namespace pmiv

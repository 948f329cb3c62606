#include "pmiv/integration.hpp"

#include "pmiv/errors.hpp"

namespace pmiv {

void validate_thresholds(std::span<const double> thresholds)
{
    if (thresholds.empty()) {
        throw DataError("partition needs at least one threshold");
    }
    double previous = 0.0;
    for (double q : thresholds) {
        if (!(q > previous) || q > 1.0) {
            throw DataError("partition thresholds must be strictly increasing within (0, 1]");
        }
        previous = q;
    }
}

Partition::Partition(std::vector<double> thresholds) : thresholds_(std::move(thresholds))
{
    validate_thresholds(thresholds_);
    if (thresholds_.back() != 1.0) {
        throw DataError("the last partition threshold must be exactly 1");
    }
}

Partition Partition::default_partition()
{
    return Partition({0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0});
}

std::vector<double> evaluate_on_graph(const FeatureFunction& f, const Sdfg& g, EvalStats* stats)
{
    std::vector<double> out;
    out.reserve(g.size());
    for (const auto& node : g.nodes) {
        out.push_back(evaluate_function(f, node, stats));
    }
    return out;
}

std::vector<double> antiderivative_values(std::span<const double> probabilities, std::span<const double> f_values,
                                          std::span<const double> thresholds)
{
    if (probabilities.size() != f_values.size()) {
        throw DataError("measure and function are defined on different vertex sets");
    }
    std::vector<double> values;
    values.reserve(thresholds.size());
    for (double q : thresholds) {
        double sum = 0.0;
        for (std::size_t v = 0; v < probabilities.size(); ++v) {
            if (probabilities[v] <= q) {
                sum += f_values[v] * probabilities[v];
            }
        }
        values.push_back(sum);
    }
    return values;
}

Antiderivative antiderivative(const Sdfg& g, const PageRankMeasure& mu, const FeatureFunction& f,
                              std::span<const double> thresholds, EvalStats* stats)
{
    validate_thresholds(thresholds);
    const auto f_values = evaluate_on_graph(f, g, stats);
    return Antiderivative{antiderivative_values(mu.probabilities, f_values, thresholds), f.name, g.function_name};
}

Antiderivative antiderivative(const Sdfg& g, const PageRankMeasure& mu, const FeatureFunction& f,
                              const Partition& partition, EvalStats* stats)
{
    return antiderivative(g, mu, f, partition.thresholds(), stats);
}

double uniform_average(std::span<const double> f_values)
{
    if (f_values.empty()) {
        throw DataError("uniform integral over an empty graph");
    }
    double sum = 0.0;
    for (double x : f_values) {
        sum += x;
    }
    return sum / static_cast<double>(f_values.size());
}

double uniform_integral(const Sdfg& g, const FeatureFunction& f, EvalStats* stats)
{
    return uniform_average(evaluate_on_graph(f, g, stats));
}

} // namespace pmiv

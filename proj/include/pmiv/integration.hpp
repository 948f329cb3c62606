#pragma once

#include <span>
#include <string>
#include <vector>

#include "pmiv/features.hpp"
#include "pmiv/pagerank.hpp"
#include "pmiv/sdfg.hpp"

namespace pmiv {

/// Thresholds 0 < q_1 < ... < q_m = 1 on which antiderivatives are sampled.
class Partition {
public:
    /// Throws DataError unless strictly increasing in (0, 1] and ending at 1.
    explicit Partition(std::vector<double> thresholds);
    static Partition default_partition();

    std::span<const double> thresholds() const noexcept { return thresholds_; }
    std::size_t size() const noexcept { return thresholds_.size(); }

    friend bool operator==(const Partition&, const Partition&) = default;

private:
    std::vector<double> thresholds_;
};

/// Strictly increasing thresholds in (0, 1]; the terminal value is not forced.
void validate_thresholds(std::span<const double> thresholds);

struct Antiderivative {
    std::vector<double> values; // one per threshold
    std::string function_name;
    std::string graph_id;
};

/// f evaluated on every vertex of g, in vertex order.
std::vector<double> evaluate_on_graph(const FeatureFunction& f, const Sdfg& g, EvalStats* stats = nullptr);

/// values[j] = sum over vertices v (in index order) with p_v <= q_j of f(v) * p_v.
std::vector<double> antiderivative_values(std::span<const double> probabilities, std::span<const double> f_values,
                                          std::span<const double> thresholds);

Antiderivative antiderivative(const Sdfg& g, const PageRankMeasure& mu, const FeatureFunction& f,
                              std::span<const double> thresholds, EvalStats* stats = nullptr);
Antiderivative antiderivative(const Sdfg& g, const PageRankMeasure& mu, const FeatureFunction& f,
                              const Partition& partition, EvalStats* stats = nullptr);

/// Plain average of f over the vertex set. Throws DataError on an empty graph.
double uniform_integral(const Sdfg& g, const FeatureFunction& f, EvalStats* stats = nullptr);
double uniform_average(std::span<const double> f_values);

} // namespace pmiv

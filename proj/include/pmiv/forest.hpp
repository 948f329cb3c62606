#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmiv/ast.hpp"
#include "pmiv/vectorize.hpp"

namespace pmiv {

enum class Label : std::uint8_t { Benign = 0, Malicious = 1 };

std::string_view to_string(Label label) noexcept;
/// "benign" / "malicious" (also "0"/"1"). Throws DataError otherwise.
Label parse_label(std::string_view text);

struct MaxFeatures {
    enum class Rule { Sqrt, All, Fixed };
    Rule rule = Rule::Sqrt;
    std::size_t count = 0; // for Rule::Fixed

    /// Features examined per split for a k-dimensional input: ceil(sqrt(k)), k, or min(count, k).
    std::size_t resolve(std::size_t k) const;
    friend bool operator==(const MaxFeatures&, const MaxFeatures&) = default;
};

/// Random-forest hyperparameters. Switches that are no-ops at their default
/// values (max_leaf_nodes, warm_start, oob_score, min_weight_fraction_leaf,
/// class_weight) are accepted only at those values.
struct ForestConfig {
    std::size_t n_estimators = 100;
    MaxFeatures max_features;
    bool bootstrap = true;
    std::optional<std::size_t> max_depth;
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    /// Minimum impurity decrease a split must achieve.
    double min_impurity_split = 2.09876756095e-05;
    std::uint64_t seed = 0;

    /// The reference hyperparameters (480 trees).
    static ForestConfig reference();
    void validate() const;

    friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

Json to_json(const ForestConfig& cfg);
/// Missing keys keep their defaults. Throws DataError on unknown keys or unsupported values.
ForestConfig forest_config_from_json(const Json& j);

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;    // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double p_malicious = 0.0; // leaf class distribution; P(benign) = 1 - p_malicious

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
    std::vector<TreeNode> nodes; // nodes[0] is the root

    const TreeNode& leaf_for(std::span<const double> x) const;
    double predict_proba(std::span<const double> x) const { return leaf_for(x).p_malicious; }
    /// The tree's vote: malicious iff its leaf puts at least half the mass on malicious.
    bool votes_malicious(std::span<const double> x) const { return predict_proba(x) >= 0.5; }
    std::size_t depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    ForestConfig config;
    std::string schema_hash;
    std::size_t feature_count = 0;

    friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

/// Gini impurity of a two-class node.
double gini(double benign, double malicious);

/// Grows cfg.n_estimators trees; tree t uses the RNG stream seeded with
/// cfg.seed + t, so the result does not depend on `workers`.
/// Throws DataError on empty or single-class input and SchemaMismatch on mixed schemas.
ForestModel train(std::span<const FileVector> vectors, std::span<const Label> labels, const ForestConfig& cfg,
                  std::size_t workers = 1);
ForestModel train_matrix(const std::vector<std::vector<double>>& rows, std::span<const Label> labels,
                         const ForestConfig& cfg, std::string schema_hash, std::size_t workers = 1);

struct Prediction {
    Label label = Label::Benign;
    double score = 0.0; // fraction of trees voting malicious

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

Prediction predict(const ForestModel& model, std::span<const double> values);
/// Throws SchemaMismatch when v was built under another feature space.
Prediction predict(const ForestModel& model, const FileVector& v);

struct ClassReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

/// Malicious is the positive class.
struct Metrics {
    ClassReport benign;
    ClassReport malicious;
    ClassReport weighted; // support-weighted average ("avg/total")
    double accuracy = 0.0;
    double false_positive_rate = 0.0;
    double false_negative_rate = 0.0;
    std::size_t true_positives = 0, false_positives = 0, true_negatives = 0, false_negatives = 0;

    std::string to_table() const;
    Json to_json() const;
};

Metrics metrics_from_predictions(std::span<const Label> truth, std::span<const Label> predicted);
Metrics evaluate(const ForestModel& model, std::span<const FileVector> vectors, std::span<const Label> labels);

/// Versioned JSON container with an integrity digest.
std::string save(const ForestModel& model);
/// Throws DataError on truncated/corrupt payloads, version or digest mismatch.
ForestModel load(std::string_view bytes);

} // namespace pmiv

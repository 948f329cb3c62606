#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pmiv/ast.hpp"
#include "pmiv/forest.hpp"

namespace pmiv {

using KindWeights = std::vector<std::pair<std::string, double>>;

/// Generator parameters for one class.
struct ClassParams {
    double branch_probability = 0.1;
    double loop_probability = 0.05;
    /// Probability that a Call targets another function of the same file.
    double call_density = 0.2;
    /// Probability that an external Call uses a crypto-looking API name.
    double crypto_name_probability = 0.0;
    /// Kinds of statement roots and of operand subtrees.
    KindWeights statement_kinds;
    KindWeights operand_kinds;
    std::size_t statements_min = 4;
    std::size_t statements_max = 10;
    std::size_t expression_depth = 2;
    std::size_t arguments_min = 0;
    std::size_t arguments_max = 3;
    double literal_max = 16.0;
    /// External API names are drawn uniformly from Api<offset> .. Api<offset + size - 1>.
    std::size_t api_vocabulary_offset = 0;
    std::size_t api_vocabulary_size = 40;
    std::size_t type_vocabulary_offset = 0;
    std::size_t type_vocabulary_size = 20;

    friend bool operator==(const ClassParams&, const ClassParams&) = default;
};

/// Class A is labelled benign, class B malicious.
struct CorpusSpec {
    std::size_t files_per_class = 100;
    std::size_t functions_min = 3;
    std::size_t functions_max = 8;
    ClassParams class_a;
    ClassParams class_b;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const CorpusSpec&, const CorpusSpec&) = default;
};

/// Both classes differ in kind weights, vocabularies and crypto usage.
CorpusSpec texture_preset(std::size_t files_per_class, std::uint64_t seed);
/// Both classes share every node and attribute distribution; they differ only
/// in how statements are nested into branches and loops.
CorpusSpec topology_only_preset(std::size_t files_per_class, std::uint64_t seed);

Json to_json(const ClassParams& p);
Json to_json(const CorpusSpec& spec);
/// Accepts either a full spec or {"preset": "texture" | "topology-only", ...}
/// with top-level overrides. Unknown keys are rejected with DataError.
CorpusSpec corpus_spec_from_json(const Json& j);

struct LabeledDocument {
    FileDocument document;
    Label label = Label::Benign;
};

/// Deterministic for a fixed spec. Class A files come first, then class B.
/// Throws DataError on a degenerate spec.
std::vector<LabeledDocument> generate(const CorpusSpec& spec);
std::vector<LabeledDocument> generate_topology_only(std::size_t files_per_class, std::uint64_t seed);

/// Writes `<file_id>.json` per document plus manifest.json listing
/// {file_id, path, label} and the spec.
void write_corpus(const std::vector<LabeledDocument>& corpus, const CorpusSpec& spec,
                  const std::filesystem::path& dir);

struct HomogeneityResult {
    double statistic = 0.0;
    std::size_t degrees_of_freedom = 0;
    double p_value = 1.0;
};

/// Chi-square test of homogeneity between the pooled vertex-kind histograms of
/// the two classes (control constructs excluded).
HomogeneityResult kind_homogeneity_test(const std::vector<LabeledDocument>& corpus);

} // namespace pmiv

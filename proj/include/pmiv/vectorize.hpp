#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pmiv/ast.hpp"
#include "pmiv/callgraph.hpp"
#include "pmiv/features.hpp"
#include "pmiv/integration.hpp"
#include "pmiv/sdfg.hpp"

namespace pmiv {

enum class Mode { Pmiv, Umiv };

std::string_view to_string(Mode mode) noexcept;
/// "pmiv" / "umiv", case-insensitive. Throws DataError otherwise.
Mode parse_mode(std::string_view text);

struct VectorizerConfig {
    Mode mode = Mode::Pmiv;
    Partition partition = Partition::default_partition();
    std::vector<std::string> expected_type_kinds = default_expected_type_kinds();
    std::vector<std::string> crypto_substrings = default_crypto_substrings();
    double transport_p = kDefaultTransport;
    std::size_t max_paths = kDefaultMaxPaths;
};

struct FileVectorMetadata {
    std::size_t sdfg_count = 0;       // functions in the file
    std::size_t empty_sdfg_count = 0; // excluded from integration statistics
    std::size_t structural_fallbacks = 0;
    std::size_t feature_warnings = 0;
    bool no_integration = false; // no nonempty SDFG: integration coordinates are all 0

    friend bool operator==(const FileVectorMetadata&, const FileVectorMetadata&) = default;
};

struct FileVector {
    std::string file_id;
    std::vector<double> values;
    std::string schema_hash;
    Mode mode = Mode::Pmiv;
    FileVectorMetadata metadata;

    friend bool operator==(const FileVector&, const FileVector&) = default;
};

/// Maps files into a fixed feature space. For every catalog function: the
/// mean then the std (population) across the file's nonempty SDFGs of its
/// antiderivative at each threshold (PMIV) or of its uniform average (UMIV),
/// followed by the 7 call-graph features.
class Vectorizer {
public:
    explicit Vectorizer(VectorizerConfig config = {});
    Vectorizer(VectorizerConfig config, std::vector<FeatureFunction> catalog);

    const VectorizerConfig& config() const noexcept { return config_; }
    const std::vector<FeatureFunction>& catalog() const noexcept { return catalog_; }
    Mode mode() const noexcept { return config_.mode; }

    const std::string& schema_hash() const noexcept { return schema_hash_; }
    /// Identity of the single-graph feature space (catalog x partition).
    const std::string& graph_schema_hash() const noexcept { return graph_schema_hash_; }
    std::size_t dimension() const noexcept;
    std::vector<std::string> column_names() const;
    Json schema_json() const;

    /// Per-graph integration coordinates: |catalog| x |partition| (PMIV) or |catalog| (UMIV).
    std::vector<double> integrate(const Sdfg& g, EvalStats* stats = nullptr) const;

    FileVector vectorize(const FileDocument& doc) const;

private:
    VectorizerConfig config_;
    std::vector<FeatureFunction> catalog_;
    std::string schema_hash_;
    std::string graph_schema_hash_;
};

FileVector vectorize_file_pmiv(const FileDocument& doc, VectorizerConfig config = {});
FileVector vectorize_file_umiv(const FileDocument& doc, VectorizerConfig config = {});

/// Order-independent canonical digest of one SDFG: sorted kind-labelled edges
/// plus the sorted multiset of node summaries (kind and literal attributes).
std::string graph_digest(const Sdfg& g);

/// Digest of the lexicographically sorted concatenation of per-function graph
/// digests; invariant under function reordering.
std::string dedup_hash(const FileDocument& doc, std::size_t max_paths = kDefaultMaxPaths);

Json to_json(const FileVector& v);
FileVector file_vector_from_json(const Json& j);
/// Reads every record of a JSONL stream. Throws ParseError with the line's byte offset.
std::vector<FileVector> read_jsonl(std::istream& in);
void write_csv_header(std::ostream& out, const std::vector<std::string>& columns);
void write_csv_row(std::ostream& out, const FileVector& v);

} // namespace pmiv

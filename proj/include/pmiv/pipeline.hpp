#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "pmiv/forest.hpp"
#include "pmiv/similarity.hpp"
#include "pmiv/vectorize.hpp"

namespace pmiv {

struct SplitRatios {
    double train = 0.7;
    double validation = 0.1;
    double test = 0.2;

    friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

std::size_t default_workers();

struct PipelineConfig {
    VectorizerConfig vectorizer;
    ForestConfig forest;
    std::size_t workers = default_workers();
    std::uint64_t seed = 0;
    SplitRatios split;

    void validate() const;
};

/// Keys: mode, partition, expected_type_kinds, crypto_substrings, transport_p,
/// max_paths, forest {...}, workers, seed, split {train, validation, test}.
/// Missing keys keep their defaults; unknown keys throw DataError.
PipelineConfig pipeline_config_from_json(const Json& j);
Json to_json(const PipelineConfig& cfg);

/// Expands files and directories (every *.json except manifest.json, sorted by path).
std::vector<std::filesystem::path> collect_inputs(const std::vector<std::string>& args);

std::string read_file(const std::filesystem::path& path);

/// Runs fn(i) for i in [0, n) on `workers` threads; results keep index order.
template <class Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn fn) -> std::vector<decltype(fn(std::size_t{}))>
{
    std::vector<decltype(fn(std::size_t{}))> out(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            out[i] = fn(i);
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }
    return out;
}

struct InputFailure {
    std::filesystem::path path;
    std::string message;
    int exit_code = 0;
};

/// Exit code 3 for parse/validation errors, 4 for anything else.
InputFailure input_failure(const std::filesystem::path& path, const std::exception& e);

struct VectorizeOutcome {
    std::vector<FileVector> vectors; // input order, failures skipped
    std::vector<InputFailure> failures;
};

VectorizeOutcome vectorize_files(const std::vector<std::filesystem::path>& paths, const Vectorizer& vectorizer,
                                 std::size_t workers);
std::vector<FileVector> vectorize_documents(const std::vector<FileDocument>& docs, const Vectorizer& vectorizer,
                                            std::size_t workers);

/// Reads labels from a corpus manifest ({"files": [{file_id, label}, ...]})
/// or from a JSON object mapping file_id to label.
std::map<std::string, Label> read_labels(const std::filesystem::path& path);

struct DatasetSplit {
    std::vector<std::size_t> train, validation, test;
};

/// Stratified seeded split: each class is shuffled and cut by the ratios.
DatasetSplit split_indices(std::span<const Label> labels, const SplitRatios& ratios, std::uint64_t seed);

struct TrainReport {
    ForestModel model;
    DatasetSplit split;
    Metrics validation;
    Metrics test;

    /// Text report: both metric tables.
    std::string to_text() const;
    Json to_json() const;
};

TrainReport train_and_evaluate(const std::vector<FileVector>& vectors, std::span<const Label> labels,
                               const PipelineConfig& cfg);

struct ScoreRecord {
    std::string file_id;
    Prediction prediction;
    double seconds = 0.0; // parse + vectorize + predict
};

struct TimingSummary {
    std::size_t files = 0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double total_ms = 0.0;

    Json to_json() const;
};

struct ScoreOutcome {
    std::vector<ScoreRecord> records;
    std::vector<InputFailure> failures;
    TimingSummary timing;
};

/// Checks the model's schema against the vectorizer before any work starts.
ScoreOutcome score_files(const ForestModel& model, const Vectorizer& vectorizer,
                         const std::vector<std::filesystem::path>& paths, std::size_t workers);
TimingSummary summarize_timing(std::vector<double> seconds);
Json to_json(const ScoreRecord& r);

/// Symmetric matrix of pairwise Lp distances.
std::vector<std::vector<double>> distance_matrix(const std::vector<std::vector<double>>& vectors, double p);

struct DedupEntry {
    std::string file_id;
    std::string path;
    std::string digest;
};

/// {"files": [{file_id, path, digest}], "unique": n,
///  "groups": [{digest, file_ids}] for digests shared by two or more files}
Json dedup_manifest(const std::vector<DedupEntry>& entries);

} // namespace pmiv

#include "pmiv/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pmiv/errors.hpp"
#include "pmiv/hash.hpp"
#include "pmiv/random.hpp"

namespace pmiv {

namespace fs = std::filesystem;

std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

void PipelineConfig::validate() const
{
    Vectorizer{vectorizer};
    forest.validate();
    if (workers < 1) {
        throw DataError("workers must be at least 1");
    }
    for (double r : {split.train, split.validation, split.test}) {
        if (!(r >= 0.0 && r <= 1.0)) {
            throw DataError("split ratios must lie in [0, 1]");
        }
    }
    if (!(split.train > 0.0) || std::abs(split.train + split.validation + split.test - 1.0) > 1e-9) {
        throw DataError("split ratios must sum to 1 with a positive train share");
    }
}

PipelineConfig pipeline_config_from_json(const Json& j)
{
    if (!j.is_object()) {
        throw DataError("config must be a JSON object");
    }
    PipelineConfig cfg;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "mode") {
                cfg.vectorizer.mode = parse_mode(v.get<std::string>());
            } else if (key == "partition") {
                cfg.vectorizer.partition = Partition(v.get<std::vector<double>>());
            } else if (key == "expected_type_kinds") {
                cfg.vectorizer.expected_type_kinds = v.get<std::vector<std::string>>();
            } else if (key == "crypto_substrings") {
                cfg.vectorizer.crypto_substrings = v.get<std::vector<std::string>>();
            } else if (key == "transport_p") {
                cfg.vectorizer.transport_p = v.get<double>();
            } else if (key == "max_paths") {
                cfg.vectorizer.max_paths = v.get<std::size_t>();
            } else if (key == "forest") {
                cfg.forest = forest_config_from_json(v);
            } else if (key == "workers") {
                cfg.workers = v.get<std::size_t>();
            } else if (key == "seed") {
                cfg.seed = v.get<std::uint64_t>();
            } else if (key == "split") {
                for (const auto& [part, ratio] : v.items()) {
                    if (part == "train") {
                        cfg.split.train = ratio.get<double>();
                    } else if (part == "validation") {
                        cfg.split.validation = ratio.get<double>();
                    } else if (part == "test") {
                        cfg.split.test = ratio.get<double>();
                    } else {
                        throw DataError("unknown split key '" + part + "'");
                    }
                }
            } else {
                throw DataError("unknown config key '" + key + "'");
            }
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

Json to_json(const PipelineConfig& cfg)
{
    const auto& t = cfg.vectorizer.partition.thresholds();
    return Json{
        {"mode", to_string(cfg.vectorizer.mode)},
        {"partition", std::vector<double>(t.begin(), t.end())},
        {"expected_type_kinds", cfg.vectorizer.expected_type_kinds},
        {"crypto_substrings", cfg.vectorizer.crypto_substrings},
        {"transport_p", cfg.vectorizer.transport_p},
        {"max_paths", cfg.vectorizer.max_paths},
        {"forest", to_json(cfg.forest)},
        {"workers", cfg.workers},
        {"seed", cfg.seed},
        {"split", {{"train", cfg.split.train}, {"validation", cfg.split.validation}, {"test", cfg.split.test}}},
    };
}

std::vector<fs::path> collect_inputs(const std::vector<std::string>& args)
{
    std::vector<fs::path> out;
    for (const auto& arg : args) {
        const fs::path p(arg);
        if (fs::is_directory(p)) {
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file() && entry.path().extension() == ".json" &&
                    entry.path().filename() != "manifest.json") {
                    out.push_back(entry.path());
                }
            }
        } else if (fs::is_regular_file(p)) {
            out.push_back(p);
        } else {
            throw DataError("input not found: " + arg);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

InputFailure input_failure(const fs::path& path, const std::exception& e)
{
    if (const auto* parse = dynamic_cast<const ParseError*>(&e)) {
        return {path, "parse error at byte " + std::to_string(parse->byte_offset()) + ": " + e.what(), 3};
    }
    if (dynamic_cast<const ValidationError*>(&e)) {
        return {path, std::string("invalid document: ") + e.what(), 3};
    }
    return {path, e.what(), 4};
}

namespace {

struct Attempt {
    std::optional<FileVector> vector;
    std::optional<InputFailure> failure;
};

Attempt vectorize_path(const fs::path& path, const Vectorizer& vectorizer)
{
    try {
        return {vectorizer.vectorize(parse_file_document(read_file(path))), std::nullopt};
    } catch (const std::exception& e) {
        return {std::nullopt, input_failure(path, e)};
    }
}

double percentile(const std::vector<double>& sorted, double q)
{
    if (sorted.empty()) {
        return 0.0;
    }
    // Linear interpolation between closest ranks.
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

} // namespace

VectorizeOutcome vectorize_files(const std::vector<fs::path>& paths, const Vectorizer& vectorizer, std::size_t workers)
{
    auto attempts = parallel_map(paths.size(), workers, [&](std::size_t i) { return vectorize_path(paths[i], vectorizer); });
    VectorizeOutcome out;
    for (auto& a : attempts) {
        if (a.vector) {
            out.vectors.push_back(std::move(*a.vector));
        } else {
            out.failures.push_back(std::move(*a.failure));
        }
    }
    return out;
}

std::vector<FileVector> vectorize_documents(const std::vector<FileDocument>& docs, const Vectorizer& vectorizer,
                                            std::size_t workers)
{
    return parallel_map(docs.size(), workers, [&](std::size_t i) { return vectorizer.vectorize(docs[i]); });
}

std::map<std::string, Label> read_labels(const fs::path& path)
{
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw ParseError("labels file " + path.string() + ": " + e.what(), e.byte);
    }
    std::map<std::string, Label> out;
    try {
        if (j.is_object() && j.contains("files")) {
            for (const auto& f : j.at("files")) {
                out[f.at("file_id").get<std::string>()] = parse_label(f.at("label").get<std::string>());
            }
        } else if (j.is_object()) {
            for (const auto& [id, label] : j.items()) {
                out[id] = parse_label(label.get<std::string>());
            }
        } else {
            throw DataError("labels file must be a JSON object");
        }
    } catch (const Json::exception& e) {
        throw DataError("labels file " + path.string() + ": " + e.what());
    }
    return out;
}

DatasetSplit split_indices(std::span<const Label> labels, const SplitRatios& ratios, std::uint64_t seed)
{
    DatasetSplit out;
    Rng rng(seed);
    for (Label cls : {Label::Benign, Label::Malicious}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) {
                idx.push_back(i);
            }
        }
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.below(i)]);
        }
        const auto n = static_cast<double>(idx.size());
        const auto n_train = static_cast<std::size_t>(std::llround(n * ratios.train));
        const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(n * ratios.validation)));
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.validation.insert(out.validation.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                              idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::string TrainReport::to_text() const
{
    std::ostringstream os;
    os << "Validation set (" << split.validation.size() << " files)\n" << validation.to_table() << '\n';
    os << "Test set (" << split.test.size() << " files)\n" << test.to_table();
    return os.str();
}

Json TrainReport::to_json() const
{
    return Json{
        {"train_size", split.train.size()},
        {"validation", validation.to_json()},
        {"test", test.to_json()},
        {"schema_hash", model.schema_hash},
        {"trees", model.trees.size()},
    };
}

TrainReport train_and_evaluate(const std::vector<FileVector>& vectors, std::span<const Label> labels,
                               const PipelineConfig& cfg)
{
    if (vectors.size() != labels.size()) {
        throw DataError("vector and label counts differ");
    }
    TrainReport report;
    report.split = split_indices(labels, cfg.split, cfg.seed);
    auto subset = [&](const std::vector<std::size_t>& idx) {
        std::pair<std::vector<FileVector>, std::vector<Label>> s;
        for (std::size_t i : idx) {
            s.first.push_back(vectors[i]);
            s.second.push_back(labels[i]);
        }
        return s;
    };
    auto [train_x, train_y] = subset(report.split.train);
    report.model = train(train_x, train_y, cfg.forest, cfg.workers);
    auto evaluate_on = [&](const std::vector<std::size_t>& idx) {
        if (idx.empty()) {
            return Metrics{};
        }
        auto [x, y] = subset(idx);
        return evaluate(report.model, x, y);
    };
    report.validation = evaluate_on(report.split.validation);
    report.test = evaluate_on(report.split.test);
    return report;
}

TimingSummary summarize_timing(std::vector<double> seconds)
{
    TimingSummary t;
    t.files = seconds.size();
    std::sort(seconds.begin(), seconds.end());
    for (double s : seconds) {
        t.total_ms += 1e3 * s;
    }
    t.median_ms = 1e3 * percentile(seconds, 0.5);
    t.p95_ms = 1e3 * percentile(seconds, 0.95);
    return t;
}

Json TimingSummary::to_json() const
{
    return Json{{"files", files}, {"median_ms", median_ms}, {"p95_ms", p95_ms}, {"total_ms", total_ms}};
}

ScoreOutcome score_files(const ForestModel& model, const Vectorizer& vectorizer, const std::vector<fs::path>& paths,
                         std::size_t workers)
{
    if (model.schema_hash != vectorizer.schema_hash()) {
        throw SchemaMismatch("model schema " + model.schema_hash + " does not match the configured schema " +
                             vectorizer.schema_hash());
    }
    struct Scored {
        std::optional<ScoreRecord> record;
        std::optional<InputFailure> failure;
    };
    auto results = parallel_map(paths.size(), workers, [&](std::size_t i) {
        const auto start = std::chrono::steady_clock::now();
        Attempt a = vectorize_path(paths[i], vectorizer);
        if (!a.vector) {
            return Scored{std::nullopt, std::move(a.failure)};
        }
        ScoreRecord r{a.vector->file_id, predict(model, *a.vector), 0.0};
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return Scored{std::move(r), std::nullopt};
    });
    ScoreOutcome out;
    std::vector<double> seconds;
    for (auto& s : results) {
        if (s.record) {
            seconds.push_back(s.record->seconds);
            out.records.push_back(std::move(*s.record));
        } else {
            out.failures.push_back(std::move(*s.failure));
        }
    }
    out.timing = summarize_timing(std::move(seconds));
    return out;
}

Json to_json(const ScoreRecord& r)
{
    return Json{{"file_id", r.file_id}, {"label", to_string(r.prediction.label)}, {"score", r.prediction.score}};
}

std::vector<std::vector<double>> distance_matrix(const std::vector<std::vector<double>>& vectors, double p)
{
    const std::size_t n = vectors.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            d[i][j] = d[j][i] = lp_distance(vectors[i], vectors[j], p);
        }
    }
    return d;
}

Json dedup_manifest(const std::vector<DedupEntry>& entries)
{
    Json files = Json::array();
    std::map<std::string, std::vector<std::string>> by_digest;
    for (const auto& e : entries) {
        files.push_back(Json{{"file_id", e.file_id}, {"path", e.path}, {"digest", e.digest}});
        by_digest[e.digest].push_back(e.file_id);
    }
    Json groups = Json::array();
    for (const auto& [digest, ids] : by_digest) {
        if (ids.size() > 1) {
            groups.push_back(Json{{"digest", digest}, {"file_ids", ids}});
        }
    }
    return Json{{"files", std::move(files)}, {"unique", by_digest.size()}, {"groups", std::move(groups)}};
}

} // namespace pmiv

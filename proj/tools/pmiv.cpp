// pmiv: batch pipeline over decompiler AST documents.
//
// Exit codes: 0 success, 2 usage error, 3 parse/validation error in an input,
// 4 data error (bad config, schema mismatch, unreadable or corrupt files).

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "pmiv/errors.hpp"
#include "pmiv/pipeline.hpp"
#include "pmiv/synth.hpp"

namespace fs = std::filesystem;
using namespace pmiv;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitData = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string config_path;
    std::string mode;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out;

    void add_to(CLI::App& cmd, bool with_mode = true)
    {
        cmd.add_option("--config", config_path, "JSON pipeline config")->check(CLI::ExistingFile);
        if (with_mode) {
            cmd.add_option("--mode", mode, "pmiv or umiv")->check(CLI::IsMember({"pmiv", "umiv", "PMIV", "UMIV"}));
        }
        cmd.add_option("--seed", seed, "seed for splits and forest training");
        cmd.add_option("--workers", workers, "worker threads (default: available cores)")->check(CLI::PositiveNumber);
    }

    PipelineConfig load() const
    {
        PipelineConfig cfg;
        if (!config_path.empty()) {
            Json j;
            try {
                j = Json::parse(read_file(config_path));
            } catch (const Json::parse_error& e) {
                throw ParseError("config " + config_path + ": " + e.what(), e.byte);
            }
            cfg = pipeline_config_from_json(j);
        }
        if (!mode.empty()) {
            cfg.vectorizer.mode = parse_mode(mode);
        }
        if (seed) {
            cfg.seed = *seed;
            cfg.forest.seed = *seed;
        }
        if (workers) {
            cfg.workers = *workers;
        }
        cfg.validate();
        return cfg;
    }
};

/// Output stream for `--out`; "-" or empty means stdout.
class Output {
public:
    explicit Output(const std::string& path)
    {
        if (!path.empty() && path != "-") {
            if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
                fs::create_directories(parent);
            }
            file_.open(path, std::ios::binary);
            if (!file_) {
                throw DataError("cannot write " + path);
            }
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
}

void report_failures(const std::vector<InputFailure>& failures)
{
    for (const auto& f : failures) {
        std::cerr << "pmiv: skipping " << f.path.string() << ": " << f.message << '\n';
    }
}

/// Nonzero only when every input failed.
int outcome_code(std::size_t succeeded, const std::vector<InputFailure>& failures)
{
    if (succeeded == 0 && !failures.empty()) {
        return failures.front().exit_code;
    }
    return 0;
}

std::vector<fs::path> inputs_or_throw(const std::vector<std::string>& args)
{
    auto paths = collect_inputs(args);
    if (paths.empty()) {
        throw DataError("no input documents found");
    }
    return paths;
}

std::string safe_name(std::string s)
{
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
            c = '_';
        }
    }
    return s;
}

void dump_dot(const std::vector<fs::path>& paths, const VectorizerConfig& cfg, const fs::path& dir)
{
    fs::create_directories(dir);
    for (const auto& path : paths) {
        FileDocument doc;
        try {
            doc = parse_file_document(read_file(path));
        } catch (const std::exception&) {
            continue; // reported by the vectorize pass
        }
        const std::string stem = safe_name(doc.file_id.empty() ? path.stem().string() : doc.file_id);
        for (const auto& fn : doc.functions) {
            write_text(dir / (stem + "." + safe_name(fn.function_name) + ".dot"), to_dot(build_sdfg(fn, cfg.max_paths)));
        }
        write_text(dir / (stem + ".callgraph.dot"), to_dot(build_call_graph(doc, cfg.crypto_substrings)));
    }
}

int cmd_vectorize(const CommonOptions& common, const std::vector<std::string>& inputs, const std::string& format,
                  const std::string& dot_dir)
{
    const PipelineConfig cfg = common.load();
    const auto paths = inputs_or_throw(inputs);
    const Vectorizer vectorizer(cfg.vectorizer);
    const VectorizeOutcome result = vectorize_files(paths, vectorizer, cfg.workers);
    report_failures(result.failures);

    Output out(common.out);
    if (format == "csv") {
        write_csv_header(out.stream(), vectorizer.column_names());
        for (const auto& v : result.vectors) {
            write_csv_row(out.stream(), v);
        }
    } else {
        for (const auto& v : result.vectors) {
            out.stream() << to_json(v).dump() << '\n';
        }
    }
    if (!common.out.empty() && common.out != "-") {
        write_text(common.out + ".schema.json", vectorizer.schema_json().dump(1) + "\n");
    }
    if (!dot_dir.empty()) {
        dump_dot(paths, cfg.vectorizer, dot_dir);
    }
    return outcome_code(result.vectors.size(), result.failures);
}

int cmd_train(const CommonOptions& common, const std::string& vectors_path, const std::string& labels_path,
              const std::string& report_path)
{
    const PipelineConfig cfg = common.load();
    std::ifstream in(vectors_path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + vectors_path);
    }
    const auto vectors = read_jsonl(in);
    if (vectors.empty()) {
        throw DataError("no vectors in " + vectors_path);
    }
    const auto label_map = read_labels(labels_path);
    std::vector<Label> labels;
    for (const auto& v : vectors) {
        auto it = label_map.find(v.file_id);
        if (it == label_map.end()) {
            throw DataError("no label for file_id '" + v.file_id + "'");
        }
        labels.push_back(it->second);
    }
    const TrainReport report = train_and_evaluate(vectors, labels, cfg);

    Output out(common.out);
    out.stream() << save(report.model);
    std::cout << report.to_text();
    const std::string json_path =
        !report_path.empty() ? report_path : (common.out.empty() || common.out == "-" ? "" : common.out + ".report.json");
    if (!json_path.empty()) {
        write_text(json_path, report.to_json().dump(1) + "\n");
    }
    return 0;
}

int cmd_score(const CommonOptions& common, const std::string& model_path, const std::vector<std::string>& inputs,
              const std::string& timing_path)
{
    const PipelineConfig cfg = common.load();
    const ForestModel model = load(read_file(model_path));
    const auto paths = inputs_or_throw(inputs);
    const Vectorizer vectorizer(cfg.vectorizer);
    const ScoreOutcome result = score_files(model, vectorizer, paths, cfg.workers);
    report_failures(result.failures);

    Output out(common.out);
    for (const auto& r : result.records) {
        out.stream() << to_json(r).dump() << '\n';
    }
    const Json timing = result.timing.to_json();
    std::cerr << "pmiv: scored " << result.timing.files << " files, median " << result.timing.median_ms
              << " ms, p95 " << result.timing.p95_ms << " ms per file\n";
    const std::string tpath =
        !timing_path.empty() ? timing_path : (common.out.empty() || common.out == "-" ? "" : common.out + ".timing.json");
    if (!tpath.empty()) {
        write_text(tpath, timing.dump(1) + "\n");
    }
    return outcome_code(result.records.size(), result.failures);
}

int cmd_similarity(const CommonOptions& common, const std::vector<std::string>& inputs, double p, bool graphs)
{
    if (!(p >= 1.0)) {
        throw UsageError("--p must be at least 1");
    }
    const PipelineConfig cfg = common.load();
    const auto paths = inputs_or_throw(inputs);
    const Vectorizer vectorizer(cfg.vectorizer);

    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::vector<InputFailure> failures;
    if (graphs) {
        for (const auto& path : paths) {
            try {
                const FileDocument doc = parse_file_document(read_file(path));
                for (const auto& fn : doc.functions) {
                    const Sdfg g = build_sdfg(fn, cfg.vectorizer.max_paths);
                    if (g.empty()) {
                        continue;
                    }
                    ids.push_back(doc.file_id + ":" + fn.function_name);
                    rows.push_back(vectorize_graph(g, vectorizer).values);
                }
            } catch (const ParseError& e) {
                failures.push_back(input_failure(path, e));
            } catch (const ValidationError& e) {
                failures.push_back(input_failure(path, e));
            }
        }
    } else {
        VectorizeOutcome result = vectorize_files(paths, vectorizer, cfg.workers);
        failures = std::move(result.failures);
        for (auto& v : result.vectors) {
            ids.push_back(v.file_id);
            rows.push_back(std::move(v.values));
        }
    }
    report_failures(failures);
    const auto d = distance_matrix(rows, p);
    Output out(common.out);
    auto& os = out.stream();
    os << "id";
    for (const auto& id : ids) {
        os << ',' << id;
    }
    os << '\n';
    char buf[32];
    for (std::size_t i = 0; i < ids.size(); ++i) {
        os << ids[i];
        for (double x : d[i]) {
            std::snprintf(buf, sizeof buf, "%.17g", x);
            os << ',' << buf;
        }
        os << '\n';
    }
    return outcome_code(ids.size(), failures);
}

int cmd_dedup(const CommonOptions& common, const std::vector<std::string>& inputs)
{
    const PipelineConfig cfg = common.load();
    const auto paths = inputs_or_throw(inputs);
    struct Result {
        std::optional<DedupEntry> entry;
        std::optional<InputFailure> failure;
    };
    auto results = parallel_map(paths.size(), cfg.workers, [&](std::size_t i) {
        try {
            const FileDocument doc = parse_file_document(read_file(paths[i]));
            return Result{DedupEntry{doc.file_id, paths[i].string(), dedup_hash(doc, cfg.vectorizer.max_paths)},
                          std::nullopt};
        } catch (const std::exception& e) {
            return Result{std::nullopt, input_failure(paths[i], e)};
        }
    });
    std::vector<DedupEntry> entries;
    std::vector<InputFailure> failures;
    for (auto& r : results) {
        if (r.entry) {
            entries.push_back(std::move(*r.entry));
        } else {
            failures.push_back(std::move(*r.failure));
        }
    }
    report_failures(failures);
    Output out(common.out);
    out.stream() << dedup_manifest(entries).dump(1) << '\n';
    return outcome_code(entries.size(), failures);
}

int cmd_synth(const std::string& spec_path, const std::string& preset, std::size_t files,
              std::optional<std::uint64_t> seed, const std::string& out_dir)
{
    CorpusSpec spec;
    if (!spec_path.empty()) {
        Json j;
        try {
            j = Json::parse(read_file(spec_path));
        } catch (const Json::parse_error& e) {
            throw ParseError("spec " + spec_path + ": " + e.what(), e.byte);
        }
        spec = corpus_spec_from_json(j);
    } else if (preset == "texture") {
        spec = texture_preset(files, 0);
    } else {
        spec = topology_only_preset(files, 0);
    }
    if (seed) {
        spec.seed = *seed;
    }
    const auto corpus = generate(spec);
    write_corpus(corpus, spec, out_dir);
    const HomogeneityResult h = kind_homogeneity_test(corpus);
    std::cerr << "pmiv: wrote " << corpus.size() << " files to " << out_dir << " (kind chi-square " << h.statistic
              << ", dof " << h.degrees_of_freedom << ", p " << h.p_value << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Graph-integration vectorization and random-forest scoring of decompiled files"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "pmiv 1.0");

    CommonOptions common;
    std::vector<std::string> inputs;
    std::string format = "jsonl";
    std::string dot_dir;
    std::string vectors_path, labels_path, report_path, model_path, timing_path, spec_path;
    std::string preset = "topology-only";
    std::size_t files = 100;
    double p = 2.0;
    bool graphs = false;

    auto* vec = app.add_subcommand("vectorize", "map AST documents to file vectors");
    common.add_to(*vec);
    vec->add_option("inputs", inputs, "files or directories")->required();
    vec->add_option("--out", common.out, "output path (default stdout); schema sidecar at <out>.schema.json");
    vec->add_option("--format", format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
    vec->add_option("--dot", dot_dir, "also write DOT dumps of every SDFG and call graph to this directory");

    auto* trn = app.add_subcommand("train", "train a random forest on labelled vectors");
    common.add_to(*trn, false);
    trn->add_option("--vectors", vectors_path, "JSONL from `vectorize`")->required()->check(CLI::ExistingFile);
    trn->add_option("--labels", labels_path, "corpus manifest or {file_id: label} JSON")
        ->required()
        ->check(CLI::ExistingFile);
    trn->add_option("--out", common.out, "model path")->required();
    trn->add_option("--report", report_path, "JSON metrics report (default <out>.report.json)");

    auto* scr = app.add_subcommand("score", "score AST documents with a trained model");
    common.add_to(*scr);
    scr->add_option("--model", model_path, "model from `train`")->required()->check(CLI::ExistingFile);
    scr->add_option("inputs", inputs, "files or directories")->required();
    scr->add_option("--out", common.out, "JSONL of file_id, label, score (default stdout)");
    scr->add_option("--timing", timing_path, "timing summary JSON (default <out>.timing.json)");

    auto* sim = app.add_subcommand("similarity", "pairwise Lp distances between vectorizations");
    common.add_to(*sim);
    sim->add_option("inputs", inputs, "files or directories")->required();
    sim->add_option("--p", p, "norm exponent, at least 1");
    sim->add_flag("--graphs", graphs, "compare single SDFGs instead of files");
    sim->add_option("--out", common.out, "CSV output (default stdout)");

    auto* ded = app.add_subcommand("dedup", "group files with identical SDFG structure");
    common.add_to(*ded, false);
    ded->add_option("inputs", inputs, "files or directories")->required();
    ded->add_option("--out", common.out, "manifest output (default stdout)");

    std::optional<std::uint64_t> synth_seed;
    std::string synth_out;
    auto* syn = app.add_subcommand("synth", "generate a labelled synthetic corpus");
    syn->add_option("--spec", spec_path, "corpus spec JSON")->check(CLI::ExistingFile);
    syn->add_option("--preset", preset, "texture or topology-only")
        ->check(CLI::IsMember({"texture", "topology-only"}));
    syn->add_option("--files", files, "files per class when using a preset")->check(CLI::PositiveNumber);
    syn->add_option("--seed", synth_seed, "corpus seed");
    syn->add_option("--out", synth_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*vec) {
            return cmd_vectorize(common, inputs, format, dot_dir);
        }
        if (*trn) {
            return cmd_train(common, vectors_path, labels_path, report_path);
        }
        if (*scr) {
            return cmd_score(common, model_path, inputs, timing_path);
        }
        if (*sim) {
            return cmd_similarity(common, inputs, p, graphs);
        }
        if (*ded) {
            return cmd_dedup(common, inputs);
        }
        if (*syn) {
            return cmd_synth(spec_path, preset, files, synth_seed, synth_out);
        }
    } catch (const UsageError& e) {
        std::cerr << "pmiv: " << e.what() << '\n';
        return kExitUsage;
    } catch (const pmiv::ParseError& e) {
        std::cerr << "pmiv: parse error at byte " << e.byte_offset() << ": " << e.what() << '\n';
        return kExitParse;
    } catch (const pmiv::ValidationError& e) {
        std::cerr << "pmiv: invalid document: " << e.what() << '\n';
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "pmiv: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

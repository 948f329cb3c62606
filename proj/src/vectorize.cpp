#include "pmiv/vectorize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "pmiv/errors.hpp"
#include "pmiv/hash.hpp"
#include "text.hpp"

namespace pmiv {

namespace {

std::string schema_string(const std::vector<FeatureFunction>& catalog, const VectorizerConfig& cfg,
                          std::string_view mode)
{
    std::string s = "mode=" + std::string(mode) + ";p=" + detail::format_double(cfg.transport_p) + ";partition=";
    for (double q : cfg.partition.thresholds()) {
        s += detail::format_double(q) + ",";
    }
    s += ";catalog=";
    for (const auto& f : catalog) {
        s += f.name + ",";
    }
    return s;
}

/// Mean and population std of `xs`, summed in sorted order so the result does
/// not depend on the order functions appear in the file.
std::pair<double, double> mean_std(std::vector<double>& xs)
{
    if (xs.empty()) {
        return {0.0, 0.0};
    }
    std::sort(xs.begin(), xs.end());
    if (xs.front() == xs.back()) {
        return {xs.front(), 0.0};
    }
    const double n = static_cast<double>(xs.size());
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (double x : xs) {
        sq += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(sq / n)};
}

} // namespace

std::string_view to_string(Mode mode) noexcept { return mode == Mode::Pmiv ? "pmiv" : "umiv"; }

Mode parse_mode(std::string_view text)
{
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "pmiv") {
        return Mode::Pmiv;
    }
    if (s == "umiv") {
        return Mode::Umiv;
    }
    throw DataError("unknown vectorization mode '" + std::string(text) + "' (expected pmiv or umiv)");
}

Vectorizer::Vectorizer(VectorizerConfig config)
    : Vectorizer(config, default_catalog(config.expected_type_kinds))
{
}

Vectorizer::Vectorizer(VectorizerConfig config, std::vector<FeatureFunction> catalog)
    : config_(std::move(config)), catalog_(std::move(catalog))
{
    if (catalog_.empty()) {
        throw DataError("feature catalog is empty");
    }
    if (!(config_.transport_p > 0.0 && config_.transport_p < 1.0)) {
        throw DataError("transport_p must lie in (0, 1)");
    }
    if (config_.max_paths == 0) {
        throw DataError("max_paths must be at least 1");
    }
    schema_hash_ = digest_hex(schema_string(catalog_, config_, to_string(config_.mode)));
    graph_schema_hash_ = digest_hex(schema_string(catalog_, config_, "graph"));
}

std::size_t Vectorizer::dimension() const noexcept
{
    const std::size_t per_function = config_.mode == Mode::Pmiv ? 2 * config_.partition.size() : 2;
    return catalog_.size() * per_function + FcgFeatures::kCount;
}

std::vector<std::string> Vectorizer::column_names() const
{
    std::vector<std::string> names;
    names.reserve(dimension());
    for (const auto& f : catalog_) {
        if (config_.mode == Mode::Pmiv) {
            for (const char* stat : {"mean", "std"}) {
                for (double q : config_.partition.thresholds()) {
                    names.push_back(f.name + "_" + detail::percent_label(q) + "_" + stat);
                }
            }
        } else {
            names.push_back(f.name + "_uniform_mean");
            names.push_back(f.name + "_uniform_std");
        }
    }
    for (const auto& n : FcgFeatures::names()) {
        names.push_back(n);
    }
    return names;
}

Json Vectorizer::schema_json() const
{
    Json catalog = Json::array();
    for (const auto& f : catalog_) {
        catalog.push_back(f.name);
    }
    return Json{
        {"schema_hash", schema_hash_},
        {"mode", to_string(config_.mode)},
        {"dimension", dimension()},
        {"partition", std::vector<double>(config_.partition.thresholds().begin(), config_.partition.thresholds().end())},
        {"transport_p", config_.transport_p},
        {"catalog", std::move(catalog)},
        {"columns", column_names()},
    };
}

std::vector<double> Vectorizer::integrate(const Sdfg& g, EvalStats* stats) const
{
    std::vector<double> out;
    if (config_.mode == Mode::Umiv) {
        out.reserve(catalog_.size());
        for (const auto& f : catalog_) {
            out.push_back(uniform_average(evaluate_on_graph(f, g, stats)));
        }
        return out;
    }
    const PageRankMeasure mu = pagerank(g, PageRankOptions{.transport = config_.transport_p});
    out.reserve(catalog_.size() * config_.partition.size());
    for (const auto& f : catalog_) {
        const auto values = antiderivative_values(mu.probabilities, evaluate_on_graph(f, g, stats),
                                                  config_.partition.thresholds());
        out.insert(out.end(), values.begin(), values.end());
    }
    return out;
}

FileVector Vectorizer::vectorize(const FileDocument& doc) const
{
    FileVector out;
    out.file_id = doc.file_id;
    out.schema_hash = schema_hash_;
    out.mode = config_.mode;
    out.metadata.sdfg_count = doc.functions.size();

    EvalStats stats;
    std::vector<std::vector<double>> per_graph;
    for (const auto& fn : doc.functions) {
        SdfgBuild built = build_sdfg_checked(fn, config_.max_paths);
        if (built.used_structural_fallback) {
            ++out.metadata.structural_fallbacks;
        }
        if (built.graph.empty()) {
            ++out.metadata.empty_sdfg_count;
            continue;
        }
        per_graph.push_back(integrate(built.graph, &stats));
    }
    out.metadata.feature_warnings = stats.warnings;
    out.metadata.no_integration = per_graph.empty();

    const std::size_t width = config_.mode == Mode::Pmiv ? config_.partition.size() : 1;
    out.values.reserve(dimension());
    std::vector<double> column;
    for (std::size_t f = 0; f < catalog_.size(); ++f) {
        std::vector<double> means, stds;
        for (std::size_t j = 0; j < width; ++j) {
            column.clear();
            for (const auto& g : per_graph) {
                column.push_back(g[f * width + j]);
            }
            const auto [mean, std] = mean_std(column);
            means.push_back(mean);
            stds.push_back(std);
        }
        out.values.insert(out.values.end(), means.begin(), means.end());
        out.values.insert(out.values.end(), stds.begin(), stds.end());
    }
    const auto fcg = call_graph_features(build_call_graph(doc, config_.crypto_substrings)).as_vector();
    out.values.insert(out.values.end(), fcg.begin(), fcg.end());
    return out;
}

FileVector vectorize_file_pmiv(const FileDocument& doc, VectorizerConfig config)
{
    config.mode = Mode::Pmiv;
    return Vectorizer(std::move(config)).vectorize(doc);
}

FileVector vectorize_file_umiv(const FileDocument& doc, VectorizerConfig config)
{
    config.mode = Mode::Umiv;
    return Vectorizer(std::move(config)).vectorize(doc);
}

std::string graph_digest(const Sdfg& g)
{
    std::set<std::string> ids;
    for (const auto& n : g.nodes) {
        ids.insert(n.id);
    }
    auto summary = [&](const AstNode& n) {
        Json attrs = Json::object();
        for (const auto& [key, value] : n.attributes.items()) {
            if (is_statement_key(key) || is_operand_key(key)) {
                continue;
            }
            auto canonical = [&](const Json& v) -> Json {
                if (v.is_string() && ids.contains(v.get<std::string>())) {
                    return "#" + g.nodes[g.index_of(v.get<std::string>())].kind;
                }
                return v;
            };
            if (value.is_array()) {
                Json arr = Json::array();
                for (const auto& v : value) {
                    arr.push_back(canonical(v));
                }
                attrs[key] = std::move(arr);
            } else {
                attrs[key] = canonical(value);
            }
        }
        return n.kind + "|" + attrs.dump();
    };

    std::vector<std::string> nodes;
    nodes.reserve(g.nodes.size());
    for (const auto& n : g.nodes) {
        nodes.push_back(summary(n));
    }
    std::vector<std::string> edges;
    edges.reserve(g.edges.size());
    for (const auto& e : g.edges) {
        edges.push_back(nodes[e.source] + "->" + nodes[e.target]);
    }
    std::sort(nodes.begin(), nodes.end());
    std::sort(edges.begin(), edges.end());

    std::string canonical = "nodes:";
    for (const auto& s : nodes) {
        canonical += s + "\n";
    }
    canonical += "edges:";
    for (const auto& s : edges) {
        canonical += s + "\n";
    }
    return digest_hex(canonical);
}

std::string dedup_hash(const FileDocument& doc, std::size_t max_paths)
{
    std::vector<std::string> digests;
    digests.reserve(doc.functions.size());
    for (const auto& fn : doc.functions) {
        digests.push_back(graph_digest(build_sdfg(fn, max_paths)));
    }
    std::sort(digests.begin(), digests.end());
    std::string joined;
    for (const auto& d : digests) {
        joined += d;
    }
    return digest_hex(joined);
}

Json to_json(const FileVector& v)
{
    return Json{
        {"file_id", v.file_id},
        {"mode", to_string(v.mode)},
        {"schema_hash", v.schema_hash},
        {"values", v.values},
        {"metadata",
         {{"sdfg_count", v.metadata.sdfg_count},
          {"empty_sdfg_count", v.metadata.empty_sdfg_count},
          {"structural_fallbacks", v.metadata.structural_fallbacks},
          {"feature_warnings", v.metadata.feature_warnings},
          {"no_integration", v.metadata.no_integration}}},
    };
}

FileVector file_vector_from_json(const Json& j)
{
    try {
        FileVector v;
        v.file_id = j.at("file_id").get<std::string>();
        v.mode = parse_mode(j.at("mode").get<std::string>());
        v.schema_hash = j.at("schema_hash").get<std::string>();
        v.values = j.at("values").get<std::vector<double>>();
        if (auto it = j.find("metadata"); it != j.end()) {
            v.metadata.sdfg_count = it->value("sdfg_count", std::size_t{0});
            v.metadata.empty_sdfg_count = it->value("empty_sdfg_count", std::size_t{0});
            v.metadata.structural_fallbacks = it->value("structural_fallbacks", std::size_t{0});
            v.metadata.feature_warnings = it->value("feature_warnings", std::size_t{0});
            v.metadata.no_integration = it->value("no_integration", false);
        }
        return v;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("bad vector record: ") + e.what(), 0);
    }
}

std::vector<FileVector> read_jsonl(std::istream& in)
{
    std::vector<FileVector> out;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(std::string("malformed JSONL record: ") + e.what(), line_start + e.byte);
        }
        out.push_back(file_vector_from_json(j));
    }
    return out;
}

void write_csv_header(std::ostream& out, const std::vector<std::string>& columns)
{
    out << "file_id";
    for (const auto& c : columns) {
        out << ',' << c;
    }
    out << '\n';
}

void write_csv_row(std::ostream& out, const FileVector& v)
{
    out << v.file_id;
    for (double x : v.values) {
        out << ',' << detail::format_double(x);
    }
    out << '\n';
}

} // namespace pmiv

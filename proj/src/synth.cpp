#include "pmiv/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "pmiv/errors.hpp"
#include "pmiv/hash.hpp"
#include "pmiv/random.hpp"

namespace pmiv {

namespace {

const std::vector<std::string>& known_kinds()
{
    static const std::vector<std::string> kinds = {
        "AddressOf", "Assignment", "BinaryOp",  "Call",     "ClassRef",   "CLRArray",    "CLRLiteral",
        "CLRVariable", "CtorCall", "Dereference", "FieldReference", "FnPtrObj", "LocalVar", "StoreLocal",
        "TypeCast",  "TypeTest",   "UnaryOp",
    };
    return kinds;
}

bool is_leaf_kind(std::string_view kind)
{
    return kind == "LocalVar" || kind == "CLRLiteral" || kind == "FieldReference" || kind == "ClassRef" ||
           kind == "CLRVariable" || kind == "CLRArray" || kind == "FnPtrObj" || kind == "StoreLocal" ||
           kind == "UnaryOp" || kind == "AddressOf";
}

const std::vector<std::string>& crypto_api_names()
{
    static const std::vector<std::string> names = {
        "AesManaged.CreateEncryptor", "RSACryptoServiceProvider.Decrypt", "SHA256.ComputeHash",
        "CryptoStream.Write",         "MD5.Create",                       "TripleDES.CreateDecryptor",
    };
    return names;
}

const std::vector<std::string>& opcodes()
{
    static const std::vector<std::string> ops = {"Add", "Sub", "Mul", "Div", "Xor", "And", "Or", "Shl", "Ceq", "Clt"};
    return ops;
}

std::uint64_t mix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

const std::string& pick(Rng& rng, const KindWeights& weights)
{
    double total = 0.0;
    for (const auto& [_, w] : weights) {
        total += w;
    }
    double r = rng.unit() * total;
    for (const auto& [kind, w] : weights) {
        if (r < w) {
            return kind;
        }
        r -= w;
    }
    return weights.back().first;
}

/// Builds one function: first draws every expression tree, then nests them.
/// The nesting draws come last so the node distribution does not depend on
/// branch or loop probabilities.
class FunctionBuilder {
public:
    FunctionBuilder(Rng& rng, const ClassParams& params, std::string name, const std::vector<std::string>& siblings)
        : rng_(rng), params_(params), siblings_(siblings), leaf_operands_(leaf_weights(params.operand_kinds))
    {
        doc_.function_name = std::move(name);
    }

    AstDocument build()
    {
        const auto count = static_cast<std::size_t>(rng_.between(static_cast<std::int64_t>(params_.statements_min),
                                                                 static_cast<std::int64_t>(params_.statements_max)));
        for (std::size_t i = 0; i < count; ++i) {
            items_.push_back(expression(pick(rng_, params_.statement_kinds), 0));
        }
        Json ret = Json::object();
        if (rng_.chance(0.5)) {
            ret["value"] = expression(pick(rng_, leaf_operands_), params_.expression_depth);
        } else {
            ret["value"] = static_cast<double>(rng_.between(0, 4));
        }
        const std::string ret_id = add("Return", std::move(ret));

        doc_.entry_ids = nest(items_.size(), 0);
        doc_.entry_ids.push_back(ret_id);
        validate(doc_);
        return std::move(doc_);
    }

private:
    static KindWeights leaf_weights(const KindWeights& all)
    {
        KindWeights out;
        for (const auto& kw : all) {
            if (is_leaf_kind(kw.first)) {
                out.push_back(kw);
            }
        }
        if (out.empty()) {
            out.emplace_back("LocalVar", 1.0);
        }
        return out;
    }

    std::string add(std::string kind, Json attrs)
    {
        char id[16];
        std::snprintf(id, sizeof id, "%05zu", doc_.nodes.size() + 1);
        AstNode node{id, std::move(kind), std::move(attrs)};
        auto [it, _] = doc_.nodes.emplace(node.id, std::move(node));
        return it->first;
    }

    std::string operand(std::size_t depth)
    {
        const bool leaf_only = depth + 1 >= params_.expression_depth;
        return expression(pick(rng_, leaf_only ? leaf_operands_ : params_.operand_kinds), depth + 1);
    }

    std::string api_name()
    {
        if (rng_.chance(params_.crypto_name_probability)) {
            return crypto_api_names()[rng_.below(crypto_api_names().size())];
        }
        return "Api" + std::to_string(params_.api_vocabulary_offset + rng_.below(params_.api_vocabulary_size));
    }

    std::string type_name()
    {
        return "Type" + std::to_string(params_.type_vocabulary_offset + rng_.below(params_.type_vocabulary_size));
    }

    double literal() { return static_cast<double>(rng_.between(0, static_cast<std::int64_t>(params_.literal_max))); }

    Json arguments(std::size_t depth)
    {
        const auto n = rng_.between(static_cast<std::int64_t>(params_.arguments_min),
                                    static_cast<std::int64_t>(params_.arguments_max));
        Json args = Json::array();
        for (std::int64_t i = 0; i < n; ++i) {
            args.push_back(operand(depth));
        }
        return args;
    }

    std::string expression(const std::string& kind, std::size_t depth)
    {
        Json a = Json::object();
        if (kind == "Call") {
            if (!siblings_.empty() && rng_.chance(params_.call_density)) {
                a["fnName"] = siblings_[rng_.below(siblings_.size())];
            } else {
                a["fnName"] = api_name();
            }
            a["arguments"] = arguments(depth);
        } else if (kind == "CtorCall") {
            a["ctorType"] = type_name();
            a["arguments"] = arguments(depth);
        } else if (kind == "Assignment") {
            a["target"] = expression("LocalVar", depth + 1);
            a["value"] = operand(depth);
        } else if (kind == "BinaryOp") {
            a["whichOpCode"] = opcodes()[rng_.below(opcodes().size())];
            a["left"] = operand(depth);
            a["right"] = operand(depth);
        } else if (kind == "TypeTest") {
            a["testedType"] = type_name();
            a["operand"] = operand(depth);
        } else if (kind == "TypeCast") {
            a["castedType"] = type_name();
            a["operand"] = operand(depth);
        } else if (kind == "Dereference") {
            a["operand"] = operand(depth);
        } else if (kind == "StoreLocal") {
            a["localIdx"] = static_cast<double>(rng_.below(8));
            a["value"] = literal();
        } else if (kind == "UnaryOp" || kind == "AddressOf") {
            a["expr"] = literal();
        } else if (kind == "LocalVar") {
            a["name"] = "loc" + std::to_string(rng_.below(8));
        } else if (kind == "CLRLiteral") {
            a["value"] = literal();
        } else if (kind == "FieldReference") {
            a["fieldName"] = "field" + std::to_string(rng_.below(params_.type_vocabulary_size));
        } else if (kind == "ClassRef") {
            a["name"] = type_name();
        } else if (kind == "CLRVariable") {
            a["varType"] = type_name();
        } else if (kind == "CLRArray") {
            a["elemType"] = type_name();
            a["size"] = literal();
        } else if (kind == "FnPtrObj") {
            a["name"] = api_name();
        }
        return add(kind, std::move(a));
    }

    /// Consumes `budget` items in order and returns the statement ids of one block.
    std::vector<std::string> nest(std::size_t budget, std::size_t depth)
    {
        std::vector<std::string> out;
        while (budget > 0) {
            const double r = rng_.unit();
            const bool room = budget >= 2 && depth < 3;
            if (room && r < params_.branch_probability) {
                const std::string cond = take();
                --budget;
                const auto inner = static_cast<std::size_t>(rng_.between(1, static_cast<std::int64_t>(std::min<std::size_t>(budget, 4))));
                const auto then_n = static_cast<std::size_t>(rng_.between(1, static_cast<std::int64_t>(inner)));
                Json a{{"condition", cond}, {"then", nest(then_n, depth + 1)}};
                if (inner > then_n) {
                    a["else"] = nest(inner - then_n, depth + 1);
                }
                budget -= inner;
                out.push_back(add("If", std::move(a)));
            } else if (room && r < params_.branch_probability + params_.loop_probability) {
                const std::string cond = take();
                --budget;
                const auto inner = static_cast<std::size_t>(rng_.between(1, static_cast<std::int64_t>(std::min<std::size_t>(budget, 4))));
                Json a{{"condition", cond}, {"body", nest(inner, depth + 1)}};
                budget -= inner;
                out.push_back(add("While", std::move(a)));
            } else {
                out.push_back(take());
                --budget;
            }
        }
        return out;
    }

    std::string take() { return items_[next_item_++]; }

    Rng& rng_;
    const ClassParams& params_;
    const std::vector<std::string>& siblings_;
    KindWeights leaf_operands_;
    AstDocument doc_;
    std::vector<std::string> items_;
    std::size_t next_item_ = 0;
};

FileDocument generate_file(const CorpusSpec& spec, const ClassParams& params, std::uint64_t seed)
{
    Rng rng(seed);
    const auto n = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(spec.functions_min), static_cast<std::int64_t>(spec.functions_max)));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) {
        names.push_back("Method" + std::to_string(i));
    }
    FileDocument doc;
    for (std::size_t i = 0; i < n; ++i) {
        doc.functions.push_back(FunctionBuilder(rng, params, names[i], names).build());
    }
    doc.file_id = digest_hex(serialize(doc));
    return doc;
}

void validate_params(const ClassParams& p, const char* which)
{
    auto fail = [&](const std::string& msg) { throw DataError(std::string(which) + ": " + msg); };
    auto probability = [&](double x, const char* name) {
        if (!(x >= 0.0 && x <= 1.0)) {
            fail(std::string(name) + " must lie in [0, 1]");
        }
    };
    probability(p.branch_probability, "branch_probability");
    probability(p.loop_probability, "loop_probability");
    probability(p.call_density, "call_density");
    probability(p.crypto_name_probability, "crypto_name_probability");
    if (p.branch_probability + p.loop_probability > 1.0) {
        fail("branch_probability + loop_probability exceeds 1");
    }
    for (const auto* weights : {&p.statement_kinds, &p.operand_kinds}) {
        double total = 0.0;
        for (const auto& [kind, w] : *weights) {
            if (std::find(known_kinds().begin(), known_kinds().end(), kind) == known_kinds().end()) {
                fail("unsupported node kind '" + kind + "'");
            }
            if (!(w >= 0.0)) {
                fail("negative weight for '" + kind + "'");
            }
            total += w;
        }
        if (!(total > 0.0)) {
            fail("kind weights must have a positive total");
        }
    }
    if (p.statements_min < 1 || p.statements_max < p.statements_min) {
        fail("statement range must satisfy 1 <= min <= max");
    }
    if (p.arguments_max < p.arguments_min) {
        fail("argument range must satisfy min <= max");
    }
    if (p.expression_depth < 1) {
        fail("expression_depth must be at least 1");
    }
    if (p.api_vocabulary_size < 1 || p.type_vocabulary_size < 1) {
        fail("vocabulary sizes must be at least 1");
    }
    if (!(p.literal_max >= 0.0)) {
        fail("literal_max must be nonnegative");
    }
}

KindWeights base_statement_kinds()
{
    return {{"Call", 4.0},     {"Assignment", 3.0}, {"StoreLocal", 1.5}, {"CtorCall", 1.0},
            {"BinaryOp", 1.0}, {"UnaryOp", 0.5},    {"AddressOf", 0.3}};
}

KindWeights base_operand_kinds()
{
    return {{"LocalVar", 4.0},    {"CLRLiteral", 3.0}, {"FieldReference", 1.5}, {"BinaryOp", 1.5},
            {"Call", 1.0},        {"ClassRef", 0.5},   {"CLRVariable", 0.8},    {"CLRArray", 0.4},
            {"FnPtrObj", 0.2},    {"TypeCast", 0.4},   {"TypeTest", 0.2},       {"Dereference", 0.3}};
}

// Written as [[kind, weight], ...]: draw order follows list order, which a JSON
// object would not preserve.
Json weights_to_json(const KindWeights& w)
{
    Json out = Json::array();
    for (const auto& [kind, weight] : w) {
        out.push_back(Json::array({kind, weight}));
    }
    return out;
}

/// Also accepts {kind: weight}, taken in key order.
KindWeights weights_from_json(const Json& j)
{
    KindWeights out;
    if (j.is_array()) {
        for (const auto& pair : j) {
            if (!pair.is_array() || pair.size() != 2) {
                throw DataError("kind weights must be [kind, weight] pairs");
            }
            out.emplace_back(pair[0].get<std::string>(), pair[1].get<double>());
        }
        return out;
    }
    if (!j.is_object()) {
        throw DataError("kind weights must be a list of pairs or an object");
    }
    for (const auto& [kind, weight] : j.items()) {
        out.emplace_back(kind, weight.get<double>());
    }
    return out;
}

ClassParams params_from_json(const Json& j, ClassParams p)
{
    for (const auto& [key, v] : j.items()) {
        if (key == "branch_probability") {
            p.branch_probability = v.get<double>();
        } else if (key == "loop_probability") {
            p.loop_probability = v.get<double>();
        } else if (key == "call_density") {
            p.call_density = v.get<double>();
        } else if (key == "crypto_name_probability") {
            p.crypto_name_probability = v.get<double>();
        } else if (key == "statement_kinds") {
            p.statement_kinds = weights_from_json(v);
        } else if (key == "operand_kinds") {
            p.operand_kinds = weights_from_json(v);
        } else if (key == "statements") {
            p.statements_min = v.at(0).get<std::size_t>();
            p.statements_max = v.at(1).get<std::size_t>();
        } else if (key == "expression_depth") {
            p.expression_depth = v.get<std::size_t>();
        } else if (key == "arguments") {
            p.arguments_min = v.at(0).get<std::size_t>();
            p.arguments_max = v.at(1).get<std::size_t>();
        } else if (key == "literal_max") {
            p.literal_max = v.get<double>();
        } else if (key == "api_vocabulary") {
            p.api_vocabulary_offset = v.at(0).get<std::size_t>();
            p.api_vocabulary_size = v.at(1).get<std::size_t>();
        } else if (key == "type_vocabulary") {
            p.type_vocabulary_offset = v.at(0).get<std::size_t>();
            p.type_vocabulary_size = v.at(1).get<std::size_t>();
        } else {
            throw DataError("unknown class parameter '" + key + "'");
        }
    }
    return p;
}

} // namespace

void CorpusSpec::validate() const
{
    if (files_per_class == 0) {
        throw DataError("corpus spec must request at least one file per class");
    }
    if (functions_min < 1 || functions_max < functions_min) {
        throw DataError("functions per file must satisfy 1 <= min <= max");
    }
    validate_params(class_a, "class_a");
    validate_params(class_b, "class_b");
}

CorpusSpec texture_preset(std::size_t files_per_class, std::uint64_t seed)
{
    CorpusSpec spec;
    spec.files_per_class = files_per_class;
    spec.seed = seed;
    spec.class_a.statement_kinds = base_statement_kinds();
    spec.class_a.operand_kinds = base_operand_kinds();

    ClassParams& b = spec.class_b;
    b = spec.class_a;
    b.statement_kinds = {{"Call", 5.0},     {"Assignment", 2.0}, {"StoreLocal", 2.5}, {"CtorCall", 0.5},
                         {"BinaryOp", 2.0}, {"UnaryOp", 1.0},    {"AddressOf", 0.8}};
    b.operand_kinds = {{"LocalVar", 3.0}, {"CLRLiteral", 4.0}, {"FieldReference", 0.8}, {"BinaryOp", 2.5},
                       {"Call", 1.0},     {"ClassRef", 0.3},   {"CLRVariable", 0.5},    {"CLRArray", 1.0},
                       {"FnPtrObj", 0.6}, {"TypeCast", 0.6},   {"TypeTest", 0.1},       {"Dereference", 0.3}};
    b.crypto_name_probability = 0.15;
    b.literal_max = 255.0;
    b.api_vocabulary_offset = 25;
    b.type_vocabulary_offset = 10;
    b.call_density = 0.1;
    return spec;
}

CorpusSpec topology_only_preset(std::size_t files_per_class, std::uint64_t seed)
{
    CorpusSpec spec;
    spec.files_per_class = files_per_class;
    spec.seed = seed;
    ClassParams shared;
    shared.statement_kinds = base_statement_kinds();
    shared.operand_kinds = base_operand_kinds();
    shared.statements_min = 10;
    shared.statements_max = 20;
    spec.functions_min = 4;
    spec.functions_max = 10;
    spec.class_a = shared;
    spec.class_a.branch_probability = 0.02;
    spec.class_a.loop_probability = 0.01;
    spec.class_b = shared;
    spec.class_b.branch_probability = 0.45;
    spec.class_b.loop_probability = 0.3;
    return spec;
}

Json to_json(const ClassParams& p)
{
    return Json{
        {"branch_probability", p.branch_probability},
        {"loop_probability", p.loop_probability},
        {"call_density", p.call_density},
        {"crypto_name_probability", p.crypto_name_probability},
        {"statement_kinds", weights_to_json(p.statement_kinds)},
        {"operand_kinds", weights_to_json(p.operand_kinds)},
        {"statements", {p.statements_min, p.statements_max}},
        {"expression_depth", p.expression_depth},
        {"arguments", {p.arguments_min, p.arguments_max}},
        {"literal_max", p.literal_max},
        {"api_vocabulary", {p.api_vocabulary_offset, p.api_vocabulary_size}},
        {"type_vocabulary", {p.type_vocabulary_offset, p.type_vocabulary_size}},
    };
}

Json to_json(const CorpusSpec& spec)
{
    return Json{
        {"files_per_class", spec.files_per_class},
        {"functions", {spec.functions_min, spec.functions_max}},
        {"class_a", to_json(spec.class_a)},
        {"class_b", to_json(spec.class_b)},
        {"seed", spec.seed},
    };
}

CorpusSpec corpus_spec_from_json(const Json& j)
{
    if (!j.is_object()) {
        throw DataError("corpus spec must be a JSON object");
    }
    try {
        const std::size_t files = j.value("files_per_class", std::size_t{100});
        const std::uint64_t seed = j.value("seed", std::uint64_t{0});
        CorpusSpec spec;
        if (auto it = j.find("preset"); it != j.end()) {
            const std::string name = it->get<std::string>();
            if (name == "texture") {
                spec = texture_preset(files, seed);
            } else if (name == "topology-only" || name == "topology_only") {
                spec = topology_only_preset(files, seed);
            } else {
                throw DataError("unknown corpus preset '" + name + "'");
            }
        } else {
            spec.class_a.statement_kinds = base_statement_kinds();
            spec.class_a.operand_kinds = base_operand_kinds();
            spec.class_b = spec.class_a;
        }
        spec.files_per_class = files;
        spec.seed = seed;
        for (const auto& [key, v] : j.items()) {
            if (key == "preset" || key == "files_per_class" || key == "seed") {
                continue;
            }
            if (key == "functions") {
                spec.functions_min = v.at(0).get<std::size_t>();
                spec.functions_max = v.at(1).get<std::size_t>();
            } else if (key == "class_a") {
                spec.class_a = params_from_json(v, spec.class_a);
            } else if (key == "class_b") {
                spec.class_b = params_from_json(v, spec.class_b);
            } else {
                throw DataError("unknown corpus spec key '" + key + "'");
            }
        }
        spec.validate();
        return spec;
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad corpus spec: ") + e.what());
    }
}

std::vector<LabeledDocument> generate(const CorpusSpec& spec)
{
    spec.validate();
    std::vector<LabeledDocument> out;
    out.reserve(2 * spec.files_per_class);
    for (int cls = 0; cls < 2; ++cls) {
        const ClassParams& params = cls == 0 ? spec.class_a : spec.class_b;
        for (std::size_t i = 0; i < spec.files_per_class; ++i) {
            const std::uint64_t seed = mix(mix(spec.seed) ^ (static_cast<std::uint64_t>(cls) << 40 | i));
            out.push_back({generate_file(spec, params, seed), cls == 0 ? Label::Benign : Label::Malicious});
        }
    }
    return out;
}

std::vector<LabeledDocument> generate_topology_only(std::size_t files_per_class, std::uint64_t seed)
{
    return generate(topology_only_preset(files_per_class, seed));
}

void write_corpus(const std::vector<LabeledDocument>& corpus, const CorpusSpec& spec, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    Json files = Json::array();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& item = corpus[i];
        char name[64];
        std::snprintf(name, sizeof name, "%06zu_%s.json", i, item.document.file_id.c_str());
        std::ofstream out(dir / name, std::ios::binary);
        out << serialize(item.document) << '\n';
        if (!out) {
            throw DataError("cannot write " + (dir / name).string());
        }
        files.push_back(Json{{"file_id", item.document.file_id}, {"path", name}, {"label", to_string(item.label)}});
    }
    std::ofstream manifest(dir / "manifest.json", std::ios::binary);
    manifest << Json{{"spec", to_json(spec)}, {"files", std::move(files)}}.dump(1) << '\n';
    if (!manifest) {
        throw DataError("cannot write " + (dir / "manifest.json").string());
    }
}

HomogeneityResult kind_homogeneity_test(const std::vector<LabeledDocument>& corpus)
{
    std::map<std::string, std::array<double, 2>> table;
    std::array<double, 2> totals{0.0, 0.0};
    for (const auto& item : corpus) {
        const int cls = item.label == Label::Malicious ? 1 : 0;
        for (const auto& fn : item.document.functions) {
            for (const auto& [_, node] : fn.nodes) {
                if (is_control_kind(node.kind)) {
                    continue;
                }
                table[node.kind][cls] += 1.0;
                totals[cls] += 1.0;
            }
        }
    }
    HomogeneityResult r;
    const double grand = totals[0] + totals[1];
    if (table.size() < 2 || totals[0] == 0.0 || totals[1] == 0.0) {
        return r;
    }
    for (const auto& [_, counts] : table) {
        const double row = counts[0] + counts[1];
        for (int c = 0; c < 2; ++c) {
            const double expected = row * totals[c] / grand;
            r.statistic += (counts[c] - expected) * (counts[c] - expected) / expected;
        }
    }
    r.degrees_of_freedom = table.size() - 1;
    const boost::math::chi_squared dist(static_cast<double>(r.degrees_of_freedom));
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
    return r;
}

} // namespace pmiv

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "pmiv/errors.hpp"
#include "pmiv/hash.hpp"
#include "pmiv/synth.hpp"
#include "support.hpp"

using namespace pmiv;

namespace {

std::string corpus_bytes(const std::vector<LabeledDocument>& corpus)
{
    std::string out;
    for (const auto& item : corpus) {
        out += serialize(item.document);
        out += to_string(item.label);
    }
    return out;
}

/// Pearson statistic as N (sum O^2 / (R C) - 1), a different route from expected counts.
double chi_square_oracle(const std::vector<LabeledDocument>& corpus)
{
    std::map<std::string, std::array<double, 2>> table;
    for (const auto& item : corpus) {
        for (const auto& fn : item.document.functions) {
            for (const auto& [_, node] : fn.nodes) {
                if (!is_control_kind(node.kind)) {
                    table[node.kind][item.label == Label::Malicious] += 1.0;
                }
            }
        }
    }
    std::array<double, 2> cols{0.0, 0.0};
    for (const auto& [_, c] : table) {
        cols[0] += c[0];
        cols[1] += c[1];
    }
    const double n = cols[0] + cols[1];
    double s = 0.0;
    for (const auto& [_, c] : table) {
        const double row = c[0] + c[1];
        s += c[0] * c[0] / (row * cols[0]) + c[1] * c[1] / (row * cols[1]);
    }
    return n * (s - 1.0);
}

FileDocument tiny(std::size_t locals, std::size_t literals)
{
    AstDocument fn;
    fn.function_name = "f";
    for (std::size_t i = 0; i < locals + literals; ++i) {
        const std::string id = std::to_string(i);
        fn.nodes.emplace(id, AstNode{id, i < locals ? "LocalVar" : "CLRLiteral", Json::object()});
        fn.entry_ids.push_back(id);
    }
    FileDocument doc;
    doc.functions.push_back(std::move(fn));
    return doc;
}

} // namespace

TEST_CASE("generation is deterministic per seed")
{
    const CorpusSpec spec = texture_preset(10, 7);
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(a.size() == 20);
    CHECK(corpus_bytes(a) == corpus_bytes(b));
    CHECK(corpus_bytes(a) != corpus_bytes(generate(texture_preset(10, 8))));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].label == (i < 10 ? Label::Benign : Label::Malicious));
    }
    // Growing the corpus keeps the earlier files of each class.
    const auto bigger = generate(texture_preset(12, 7));
    CHECK(serialize(bigger[3].document) == serialize(a[3].document));
    CHECK(serialize(bigger[12 + 3].document) == serialize(a[10 + 3].document));
}

TEST_CASE("generated documents are valid, round-trip and carry content digests")
{
    for (const auto& spec : {texture_preset(15, 3), topology_only_preset(15, 3)}) {
        std::set<std::string> ids;
        for (const auto& item : generate(spec)) {
            const FileDocument& doc = item.document;
            CHECK(parse_file_document(serialize(doc)) == doc);
            CHECK(doc.functions.size() >= spec.functions_min);
            CHECK(doc.functions.size() <= spec.functions_max);
            FileDocument anonymous = doc;
            anonymous.file_id.clear();
            CHECK(doc.file_id == digest_hex(serialize(anonymous)));
            ids.insert(doc.file_id);
            for (const auto& fn : doc.functions) {
                CHECK_NOTHROW(validate(fn));
                CHECK_FALSE(build_sdfg(fn).empty());
            }
        }
        CHECK(ids.size() == 30);
    }
}

TEST_CASE("without branches or loops every function is a chain")
{
    CorpusSpec spec = topology_only_preset(10, 5);
    for (ClassParams* p : {&spec.class_a, &spec.class_b}) {
        p->branch_probability = 0.0;
        p->loop_probability = 0.0;
    }
    for (const auto& item : generate(spec)) {
        for (const auto& fn : item.document.functions) {
            CHECK(enumerate_paths(fn).paths.size() == 1);
            const Sdfg g = build_sdfg(fn);
            CHECK(g.edges.size() + 1 == g.size());
        }
    }
}

TEST_CASE("the topology-only classes differ in control structure")
{
    const auto corpus = generate(topology_only_preset(100, 11));
    double branchy[2] = {0.0, 0.0};
    for (const auto& item : corpus) {
        for (const auto& fn : item.document.functions) {
            for (const auto& [_, node] : fn.nodes) {
                branchy[item.label == Label::Malicious] += is_control_kind(node.kind);
            }
        }
    }
    CHECK(branchy[1] > 5.0 * branchy[0]);
}

TEST_CASE("homogeneity statistic matches the oracle")
{
    for (const auto& spec : {texture_preset(40, 1), topology_only_preset(40, 1)}) {
        const auto corpus = generate(spec);
        const HomogeneityResult r = kind_homogeneity_test(corpus);
        CHECK(r.statistic == doctest::Approx(chi_square_oracle(corpus)).epsilon(1e-9));
    }
    // Two kinds: one degree of freedom, p = erfc(sqrt(x / 2)).
    const std::vector<LabeledDocument> corpus{{tiny(10, 10), Label::Benign}, {tiny(15, 5), Label::Malicious}};
    const HomogeneityResult r = kind_homogeneity_test(corpus);
    CHECK(r.degrees_of_freedom == 1);
    CHECK(r.statistic == doctest::Approx(chi_square_oracle(corpus)));
    CHECK(r.p_value == doctest::Approx(std::erfc(std::sqrt(r.statistic / 2.0))).epsilon(1e-10));
}

TEST_CASE("topology-only corpora are kind-homogeneous, texture corpora are not")
{
    for (std::uint64_t seed : {1, 2, 3}) {
        const HomogeneityResult r = kind_homogeneity_test(generate(topology_only_preset(500, seed)));
        INFO("seed " << seed << " statistic " << r.statistic << " p " << r.p_value);
        CHECK(r.p_value > 0.05);
    }
    CHECK(kind_homogeneity_test(generate(texture_preset(100, 1))).p_value < 1e-6);
}

TEST_CASE("degenerate specs are rejected")
{
    CHECK_THROWS_AS(generate(texture_preset(0, 1)), DataError);
    CorpusSpec spec = texture_preset(5, 1);
    spec.functions_min = 5;
    spec.functions_max = 4;
    CHECK_THROWS_AS(generate(spec), DataError);
    spec = texture_preset(5, 1);
    spec.class_a.branch_probability = 1.5;
    CHECK_THROWS_AS(generate(spec), DataError);
    spec = texture_preset(5, 1);
    spec.class_b.statement_kinds.clear();
    CHECK_THROWS_AS(generate(spec), DataError);
}

TEST_CASE("spec JSON")
{
    for (const auto& spec : {texture_preset(12, 4), topology_only_preset(3, 9)}) {
        CHECK(corpus_spec_from_json(to_json(spec)) == spec);
    }
    CHECK(corpus_spec_from_json(Json{{"preset", "topology-only"}, {"files_per_class", 3}, {"seed", 9}}) ==
          topology_only_preset(3, 9));
    const CorpusSpec tweaked = corpus_spec_from_json(
        Json{{"preset", "texture"}, {"functions", {2, 2}}, {"class_b", {{"branch_probability", 0.7}}}});
    CHECK(tweaked.functions_min == 2);
    CHECK(tweaked.class_b.branch_probability == 0.7);
    CHECK(tweaked.class_a == texture_preset(100, 0).class_a);

    const CorpusSpec weighted = corpus_spec_from_json(
        Json{{"preset", "texture"}, {"class_a", {{"statement_kinds", {{"StoreLocal", 1.0}, {"Call", 3.0}}}}}});
    CHECK(weighted.class_a.statement_kinds == KindWeights{{"Call", 3.0}, {"StoreLocal", 1.0}});
    const CorpusSpec listed = corpus_spec_from_json(
        Json{{"preset", "texture"}, {"class_a", {{"statement_kinds", Json::array({Json::array({"StoreLocal", 1.0}),
                                                                              Json::array({"Call", 3.0})})}}}});
    CHECK(listed.class_a.statement_kinds == KindWeights{{"StoreLocal", 1.0}, {"Call", 3.0}});

    CHECK_THROWS_AS(corpus_spec_from_json(Json{{"preset", "nope"}}), DataError);
    CHECK_THROWS_AS(corpus_spec_from_json(Json{{"files", 3}}), DataError);
    CHECK_THROWS_AS(corpus_spec_from_json(Json{{"class_a", {{"colour", 1}}}}), DataError);
    CHECK_THROWS_AS(corpus_spec_from_json(Json{{"files_per_class", 0}}), DataError);
}

TEST_CASE("corpus on disk")
{
    const auto dir = std::filesystem::temp_directory_path() / "pmiv_test_synth";
    std::filesystem::remove_all(dir);
    const CorpusSpec spec = texture_preset(3, 2);
    const auto corpus = generate(spec);
    write_corpus(corpus, spec, dir);
    std::ifstream in(dir / "manifest.json");
    const Json m = Json::parse(in);
    CHECK(corpus_spec_from_json(m.at("spec")) == spec);
    CHECK(corpus_bytes(generate(corpus_spec_from_json(m.at("spec")))) == corpus_bytes(corpus));
    REQUIRE(m.at("files").size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        const Json& entry = m.at("files")[i];
        CHECK(entry.at("file_id") == corpus[i].document.file_id);
        CHECK(entry.at("label") == to_string(corpus[i].label));
        std::ifstream f(dir / entry.at("path").get<std::string>(), std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        CHECK(parse_file_document(ss.str()) == corpus[i].document);
    }
    std::filesystem::remove_all(dir);
}

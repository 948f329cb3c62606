#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pmiv/errors.hpp"
#include "pmiv/hash.hpp"
#include "pmiv/integration.hpp"
#include "support.hpp"

using namespace pmiv;

namespace {

const FeatureFunction& by_name(const std::vector<FeatureFunction>& catalog, std::string_view name)
{
    for (const auto& f : catalog) {
        if (f.name == name) {
            return f;
        }
    }
    throw std::runtime_error("no feature " + std::string(name));
}

Sdfg graph_of(std::vector<AstNode> nodes, std::vector<Edge> edges)
{
    Sdfg g;
    g.function_name = "g";
    g.nodes = std::move(nodes);
    g.edges = std::move(edges);
    return g;
}

} // namespace

TEST_CASE("pinned hash golden values")
{
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("System.Web.UI") == 0x8fb06d9d8bacccacull);
    CHECK(hash_feature("System.Web.UI") == doctest::Approx(18.908101383917).epsilon(1e-12));
    CHECK(hash_feature("") == doctest::Approx(18.574119627168734).epsilon(1e-14));
    CHECK(hash_feature("a") == doctest::Approx(18.764068246008915).epsilon(1e-14));
    CHECK(hash_feature("AddParsedSubObject") == doctest::Approx(18.60018069689234).epsilon(1e-14));
    CHECK(hash_feature_from_digest(0) == 0.0);
    CHECK(hash_feature_from_digest(1) == 0.0);
    CHECK(hash_feature_from_digest(~0ull) == 0.0); // -1
}

TEST_CASE("hash feature stays within its range")
{
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        const auto len = rng.below(24);
        for (std::uint64_t k = 0; k < len; ++k) {
            s.push_back(static_cast<char>(32 + rng.below(95)));
        }
        const double eta = hash_feature(s);
        CHECK(eta >= 0.0);
        CHECK(eta <= std::log10(std::pow(2.0, 63)) + 1e-12);
    }
    CHECK(hash_feature_from_digest(1ull << 63) == doctest::Approx(std::log10(std::pow(2.0, 63))));
}

TEST_CASE("catalog evaluates the decompiler snippet")
{
    const auto catalog = default_catalog();
    const AstDocument fn = testing::load_data("example1.json").functions[0];
    CHECK(evaluate_function(by_name(catalog, "CLRVariable"), fn.at("29")) == hash_feature("System.Web.UI"));
    CHECK(evaluate_function(by_name(catalog, "NumPass2Call"), fn.at("30")) == 0.0);
    CHECK(evaluate_function(by_name(catalog, "NumPass2Call"), fn.at("64")) == 1.0);
    CHECK(evaluate_function(by_name(catalog, "CallfnName"), fn.at("64")) == hash_feature("AddParsedSubObject"));
}

TEST_CASE("default catalog has 33 functions")
{
    const auto catalog = default_catalog();
    CHECK(catalog.size() == 33);
    CHECK(default_expected_type_kinds().size() == 14);
    CHECK(catalog.front().name == "AddressOf_ExpectedType");
    CHECK(catalog.back().name == "Returnvalue");
    AstNode classref{"1", "ClassRef", Json{{"name", "X"}}};
    CHECK(evaluate_function(by_name(catalog, "ClassRef_ExpectedType"), classref) == 1.0);
    CHECK(evaluate_function(by_name(catalog, "LocalVar_ExpectedType"), classref) == 0.0);
    CHECK(evaluate_function(by_name(catalog, "AddressOf"), classref) == 0.0);
}

TEST_CASE("attribute rules")
{
    const auto catalog = default_catalog();
    EvalStats stats;
    AstNode ret_num{"1", "Return", Json{{"value", 2.5}}};
    AstNode ret_ref{"1", "Return", Json{{"value", "7"}}};
    AstNode ret_obj{"1", "Return", Json{{"value", Json{{"k", 1}}}}};
    const auto& rv = by_name(catalog, "Returnvalue");
    CHECK(evaluate_function(rv, ret_num, &stats) == 2.5);
    CHECK(evaluate_function(rv, ret_ref, &stats) == 0.0);
    CHECK(evaluate_function(rv, ret_obj, &stats) == 0.0);
    CHECK(stats.warnings == 0);

    AstNode call_bad{"1", "Call", Json{{"arguments", "oops"}}};
    CHECK(evaluate_function(by_name(catalog, "NumPass2Call"), call_bad, &stats) == 0.0);
    CHECK(stats.warnings == 1);
    AstNode call_missing{"1", "Call", Json::object()};
    CHECK(evaluate_function(by_name(catalog, "NumPass2Call"), call_missing, &stats) == 0.0);
    CHECK(stats.warnings == 1);

    AstNode lit{"1", "StoreLocal", Json{{"localIdx", 3}, {"value", -4}}};
    CHECK(evaluate_function(by_name(catalog, "StoreLocallocalIdx"), lit) == 3.0);
    CHECK(evaluate_function(by_name(catalog, "StoreLocalvalue"), lit) == -4.0);
}

TEST_CASE("worked example with an irregular partition")
{
    // PageRank <0.1, 0.15, 0.25, 0.5>; calls on v1 and v4.
    const std::vector<double> p{0.1, 0.15, 0.25, 0.5};
    const std::vector<double> q{0.05, 0.12, 0.20, 0.95};
    for (double a1 : {0.0, 1.0, 2.0, 3.0, 7.0}) {
        for (double a4 : {0.0, 1.0, 4.0, 5.0}) {
            const std::vector<double> f{a1, 0.0, 0.0, a4};
            const auto values = antiderivative_values(p, f, q);
            CHECK(values == std::vector<double>{0.0, 0.1 * a1, 0.1 * a1, 0.1 * a1 + 0.5 * a4});
        }
    }
}

TEST_CASE("worked example through graph nodes and the catalog function")
{
    std::vector<AstNode> nodes{
        {"v1", "Call", Json{{"arguments", Json::array({"v2", "v3"})}}},
        {"v2", "LocalVar", Json::object()},
        {"v3", "LocalVar", Json::object()},
        {"v4", "Call", Json{{"arguments", Json::array({"v2"})}}},
    };
    const Sdfg g = graph_of(nodes, {});
    PageRankMeasure mu;
    mu.probabilities = {0.1, 0.15, 0.25, 0.5};
    const auto catalog = default_catalog();
    const std::vector<double> q{0.05, 0.12, 0.20, 0.95};
    const Antiderivative a = antiderivative(g, mu, by_name(catalog, "NumPass2Call"), q);
    CHECK(a.values == std::vector<double>{0.0, 0.1 * 2, 0.1 * 2, 0.1 * 2 + 0.5 * 1});
    CHECK(uniform_integral(g, by_name(catalog, "NumPass2Call")) == doctest::Approx((2.0 + 1.0) / 4.0));
}

TEST_CASE("partition validation")
{
    CHECK_NOTHROW(Partition({0.5, 1.0}));
    CHECK_NOTHROW(Partition({1.0}));
    CHECK_THROWS_AS(Partition({}), DataError);
    CHECK_THROWS_AS(Partition({0.5, 0.9}), DataError);
    CHECK_THROWS_AS(Partition({0.5, 0.5, 1.0}), DataError);
    CHECK_THROWS_AS(Partition({0.0, 1.0}), DataError);
    CHECK_THROWS_AS(Partition({0.6, 0.3, 1.0}), DataError);
    CHECK_THROWS_AS(Partition({0.5, 1.5}), DataError);
    CHECK(Partition::default_partition().size() == 10);
    CHECK_NOTHROW(validate_thresholds(std::vector<double>{0.05, 0.12, 0.20, 0.95}));
    CHECK_THROWS_AS(validate_thresholds(std::vector<double>{0.2, 0.1}), DataError);
}

TEST_CASE("constant function integrates to the total measure")
{
    const Sdfg g = build_sdfg(testing::load_data("loops.json").functions[0]);
    const auto mu = pagerank(g);
    const Antiderivative a = antiderivative(g, mu, constant_function(1.0), Partition::default_partition());
    CHECK(a.values.back() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(uniform_integral(g, constant_function(3.5)) == doctest::Approx(3.5));
}

TEST_CASE("diamond call indicator averages to one half of the vertices")
{
    const Sdfg g = build_sdfg(testing::load_data("if_else.json").functions[0]);
    CHECK(uniform_integral(g, expected_type("Call")) == 1.0);
    // One Call among four vertices.
    std::vector<AstNode> nodes = g.nodes;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        nodes[i].kind = "LocalVar";
    }
    CHECK(uniform_integral(graph_of(nodes, g.edges), expected_type("Call")) == 0.25);
}

TEST_CASE("random graphs: antiderivative equals the filtered sum and is monotone for nonnegative f")
{
    Rng rng(9);
    const auto catalog = default_catalog();
    const std::vector<std::string> kinds{"Call", "LocalVar", "CLRLiteral", "ClassRef", "BinaryOp", "Return"};
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.below(8);
        std::vector<AstNode> nodes;
        for (std::size_t i = 0; i < n; ++i) {
            Json attrs{{"fnName", "f" + std::to_string(rng.below(5))},
                       {"name", "n" + std::to_string(rng.below(5))},
                       {"value", static_cast<double>(rng.between(-5, 5))},
                       {"arguments", Json::array()}};
            for (std::uint64_t k = rng.below(4); k > 0; --k) {
                attrs["arguments"].push_back("x");
            }
            nodes.push_back({"v" + std::to_string(i), kinds[rng.below(kinds.size())], std::move(attrs)});
        }
        const Sdfg g = graph_of(nodes, testing::random_digraph(rng, n, 0.3));
        const auto mu = pagerank(g);
        std::vector<double> q;
        for (double x = 0.0;;) {
            x += 0.01 + 0.3 * rng.unit();
            if (x >= 1.0) {
                break;
            }
            q.push_back(x);
        }
        q.push_back(1.0);
        const Partition part(q);
        for (const auto& f : catalog) {
            const Antiderivative a = antiderivative(g, mu, f, part);
            std::vector<double> fv;
            for (const auto& v : g.nodes) {
                fv.push_back(evaluate_function(f, v));
            }
            for (std::size_t j = 0; j < q.size(); ++j) {
                CHECK(a.values[j] == testing::filtered_sum(mu.probabilities, fv, q[j]));
            }
            if (f.nonnegative()) {
                CHECK(std::is_sorted(a.values.begin(), a.values.end()));
            }
            double full = 0.0;
            for (std::size_t v = 0; v < n; ++v) {
                full += fv[v] * mu.probabilities[v];
            }
            CHECK(a.values.back() == full);
        }
    }
}

TEST_CASE("uniform measure coincides with PageRank on vertex-transitive graphs")
{
    const auto catalog = default_catalog();
    for (std::uint32_t n : {3u, 6u}) {
        std::vector<AstNode> nodes;
        std::vector<Edge> edges;
        for (std::uint32_t i = 0; i < n; ++i) {
            nodes.push_back({"v" + std::to_string(i), i % 2 ? "Call" : "ClassRef",
                             Json{{"fnName", "f"}, {"name", "c" + std::to_string(i)}, {"arguments", Json::array({"a"})}}});
            edges.push_back({i, (i + 1) % n});
        }
        const Sdfg g = graph_of(nodes, edges);
        const auto mu = pagerank(g);
        for (const auto& f : catalog) {
            const Antiderivative a = antiderivative(g, mu, f, Partition::default_partition());
            CHECK(std::abs(a.values.back() - uniform_integral(g, f)) < 1e-10);
        }
    }
}

TEST_CASE("empty graphs are rejected by the uniform measure")
{
    CHECK_THROWS_AS(uniform_integral(Sdfg{}, constant_function(1.0)), DataError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "pmiv/sdfg.hpp"
#include "support.hpp"

using namespace pmiv;

namespace {

std::set<std::pair<std::string, std::string>> named_edges(const Sdfg& g)
{
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& e : g.edges) {
        out.emplace(g.nodes[e.source].id, g.nodes[e.target].id);
    }
    return out;
}

AstDocument chain(int n)
{
    AstDocument doc;
    doc.function_name = "chain";
    for (int i = 0; i < n; ++i) {
        const std::string id = std::to_string(i);
        doc.nodes.emplace(id, AstNode{id, "Call", Json::object()});
        doc.entry_ids.push_back(id);
    }
    return doc;
}

/// if a { if b {c} else {d} } else { if e {f} else {g} }
AstDocument diamond_of_diamonds()
{
    return parse_file_document(R"({"file_id":"d","functions":[{"name":"dd","entry":["I0"],"nodes":{
        "a":{"type":"Call"},"b":{"type":"Call"},"c":{"type":"Call"},"d":{"type":"Call"},
        "e":{"type":"Call"},"f":{"type":"Call"},"g":{"type":"Call"},
        "I1":{"type":"If","condition":"b","then":["c"],"else":["d"]},
        "I2":{"type":"If","condition":"e","then":["f"],"else":["g"]},
        "I0":{"type":"If","condition":"a","then":["I1"],"else":["I2"]}}}]})")
        .functions[0];
}

} // namespace

TEST_CASE("if/else snippet yields the four-node diamond")
{
    const AstDocument fn = testing::load_data("if_else.json").functions[0];
    const auto paths = enumerate_paths(fn);
    CHECK_FALSE(paths.truncated);
    CHECK(paths.paths == std::vector<std::vector<std::string>>{{"1", "2", "5"}, {"1", "3", "5"}});

    const Sdfg g = build_sdfg(fn);
    CHECK(g.size() == 4);
    CHECK(named_edges(g) == std::set<std::pair<std::string, std::string>>{{"1", "2"}, {"1", "3"}, {"2", "5"}, {"3", "5"}});
}

TEST_CASE("single statement gives one node and no edges")
{
    const Sdfg g = build_sdfg(chain(1));
    CHECK(g.size() == 1);
    CHECK(g.edges.empty());
}

TEST_CASE("branch-free functions are chains")
{
    for (int n : {2, 3, 7}) {
        const AstDocument doc = chain(n);
        CHECK(enumerate_paths(doc).paths.size() == 1);
        const Sdfg g = build_sdfg(doc);
        CHECK(g.edges.size() == g.size() - 1);
    }
}

TEST_CASE("expression operands are visited before their operator")
{
    const auto doc = parse_file_document(R"({"file_id":"x","functions":[{"name":"f","entry":["s"],"nodes":{
        "s":{"type":"Assignment","target":"t","value":"v"},"t":{"type":"LocalVar"},
        "v":{"type":"BinaryOp","left":"l","right":"r"},"l":{"type":"LocalVar"},"r":{"type":"CLRLiteral"}}}]})");
    const auto paths = enumerate_paths(doc.functions[0]);
    CHECK(paths.paths == std::vector<std::vector<std::string>>{{"t", "l", "r", "v", "s"}});
}

TEST_CASE("nested diamonds give four paths")
{
    const AstDocument doc = diamond_of_diamonds();
    CHECK(enumerate_paths(doc).paths.size() == 4);
    CHECK(count_paths(doc) == 4);
}

TEST_CASE("hello world functions are linear")
{
    const FileDocument doc = testing::load_data("hello_world.json");
    REQUIRE(doc.functions.size() == 2);
    for (const auto& fn : doc.functions) {
        const Sdfg g = build_sdfg(fn);
        CHECK(g.size() == 3);
        CHECK(g.edges.size() == 2);
        CHECK(enumerate_paths(fn).paths.size() == 1);
    }
}

TEST_CASE("empty function gives the empty graph")
{
    const Sdfg g = build_sdfg(AstDocument{});
    CHECK(g.empty());
    CHECK(g.edges.empty());
}

TEST_CASE("loops add a back edge and an exit edge")
{
    const AstDocument fn = testing::load_data("loops.json").functions[0];
    const auto e = named_edges(build_sdfg(fn));
    CHECK(e.contains({"4", "6"}));  // condition -> body
    CHECK(e.contains({"7", "2"}));  // body end -> loop head
    CHECK(e.contains({"4", "10"})); // exit
    CHECK(e.contains({"8", "10"})); // break leaves the loop
}

TEST_CASE("return ends the path")
{
    const auto doc = parse_file_document(R"({"file_id":"x","functions":[{"name":"f","entry":["1","2","3"],"nodes":{
        "1":{"type":"Call"},"2":{"type":"Return"},"3":{"type":"Call"}}}]})");
    const Sdfg g = build_sdfg(doc.functions[0]);
    CHECK(named_edges(g) == std::set<std::pair<std::string, std::string>>{{"1", "2"}});
    // Unreachable statements are not on any path and not in the graph.
    CHECK(g.size() == 2);
}

TEST_CASE("enumeration truncates at max_paths")
{
    const AstDocument doc = diamond_of_diamonds();
    const auto paths = enumerate_paths(doc, 3);
    CHECK(paths.truncated);
    CHECK(paths.paths.size() == 3);
    const SdfgBuild built = build_sdfg_checked(doc, 3);
    CHECK(built.used_structural_fallback);
    CHECK(built.graph == build_sdfg(doc));
}

TEST_CASE("structural emission equals merged enumeration on random functions")
{
    Rng rng(2024);
    int checked = 0;
    for (int i = 0; i < 400; ++i) {
        const AstDocument doc = testing::RandomAst(rng, 14).build();
        const auto paths = enumerate_paths(doc, 1 << 16);
        if (paths.truncated) {
            continue;
        }
        ++checked;
        const Sdfg merged = merge_paths(doc, paths.paths);
        CHECK(merged == build_sdfg_structural(doc));
        CHECK(count_paths(doc, 1 << 16) == paths.paths.size());

        // Node set equals the union of path nodes.
        std::set<std::string> on_paths;
        for (const auto& p : paths.paths) {
            on_paths.insert(p.begin(), p.end());
        }
        std::set<std::string> vertices;
        for (const auto& n : merged.nodes) {
            vertices.insert(n.id);
        }
        CHECK(vertices == on_paths);

        // Merging is idempotent.
        std::vector<std::vector<std::string>> doubled = paths.paths;
        doubled.insert(doubled.end(), paths.paths.begin(), paths.paths.end());
        CHECK(merge_paths(doc, doubled) == merged);

        // Edges are sorted, unique, and in range.
        CHECK(std::is_sorted(merged.edges.begin(), merged.edges.end()));
        CHECK(std::adjacent_find(merged.edges.begin(), merged.edges.end()) == merged.edges.end());
        for (const auto& e : merged.edges) {
            CHECK(e.source < merged.size());
            CHECK(e.target < merged.size());
        }
    }
    CHECK(checked > 300);
}

TEST_CASE("build is deterministic")
{
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const AstDocument doc = testing::RandomAst(rng, 12).build();
        CHECK(build_sdfg(doc) == build_sdfg(doc));
    }
}

TEST_CASE("dot dump names every vertex")
{
    const Sdfg g = build_sdfg(testing::load_data("if_else.json").functions[0]);
    const std::string dot = to_dot(g);
    CHECK(dot.find("digraph") == 0);
    CHECK(dot.find("1:Call") != std::string::npos);
    CHECK(dot.find("->") != std::string::npos);
}

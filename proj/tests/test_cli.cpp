#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "pmiv/forest.hpp"
#include "pmiv/vectorize.hpp"
#include "support.hpp"

using namespace pmiv;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "pmiv_test_cli";

int run(const std::string& args)
{
    const std::string cmd = std::string(PMIV_CLI) + " " + args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                            (kWork / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string at(const std::string& name) { return (kWork / name).string(); }

struct Workspace {
    Workspace()
    {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
    ~Workspace() { fs::remove_all(kWork); }
};

} // namespace

TEST_CASE("end-to-end: synth, vectorize, train, score")
{
    Workspace ws;
    REQUIRE(run("synth --preset texture --files 20 --seed 3 --out " + at("corpus")) == 0);
    CHECK(fs::exists(kWork / "corpus" / "manifest.json"));

    REQUIRE(run("vectorize " + at("corpus") + " --out " + at("v.jsonl") + " --workers 2") == 0);
    std::istringstream jsonl(slurp(kWork / "v.jsonl"));
    const auto vectors = read_jsonl(jsonl);
    CHECK(vectors.size() == 40);
    CHECK(vectors[0].values.size() == 667);
    const Json schema = Json::parse(slurp(kWork / "v.jsonl.schema.json"));
    CHECK(schema.at("dimension") == 667);
    CHECK(schema.at("schema_hash") == vectors[0].schema_hash);

    // Rerunning is byte-identical, whatever the worker count.
    REQUIRE(run("vectorize " + at("corpus") + " --out " + at("v2.jsonl") + " --workers 1") == 0);
    CHECK(slurp(kWork / "v.jsonl") == slurp(kWork / "v2.jsonl"));

    REQUIRE(run("vectorize " + at("corpus") + " --format csv --out " + at("v.csv")) == 0);
    CHECK(slurp(kWork / "v.csv").rfind("file_id,AddressOf_ExpectedType_1_mean,", 0) == 0);

    const std::string manifest = (kWork / "corpus" / "manifest.json").string();
    REQUIRE(run("train --vectors " + at("v.jsonl") + " --labels " + manifest + " --out " + at("m.json") +
                " --seed 4") == 0);
    CHECK(slurp(kWork / "stdout.txt").find("Test set") != std::string::npos);
    CHECK(Json::parse(slurp(kWork / "m.json.report.json")).contains("test"));
    const ForestModel model = load(slurp(kWork / "m.json"));
    CHECK(model.feature_count == 667);
    REQUIRE(run("train --vectors " + at("v.jsonl") + " --labels " + manifest + " --out " + at("m2.json") +
                " --seed 4 --workers 3") == 0);
    CHECK(slurp(kWork / "m.json") == slurp(kWork / "m2.json"));

    REQUIRE(run("score --model " + at("m.json") + " " + at("corpus") + " --out " + at("s.jsonl")) == 0);
    std::istringstream scores(slurp(kWork / "s.jsonl"));
    std::string line;
    std::size_t n = 0;
    while (std::getline(scores, line)) {
        const Json j = Json::parse(line);
        CHECK(j.contains("file_id"));
        CHECK((j.at("label") == "benign" || j.at("label") == "malicious"));
        ++n;
    }
    CHECK(n == 40);
    const Json timing = Json::parse(slurp(kWork / "s.jsonl.timing.json"));
    CHECK(timing.at("files") == 40);
    CHECK(timing.contains("median_ms"));
    CHECK(timing.contains("p95_ms"));
    REQUIRE(run("score --model " + at("m.json") + " " + at("corpus") + " --out " + at("s2.jsonl")) == 0);
    CHECK(slurp(kWork / "s.jsonl") == slurp(kWork / "s2.jsonl"));

    // The model remembers its feature space.
    CHECK(run("score --mode umiv --model " + at("m.json") + " " + at("corpus")) == 4);
    CHECK(slurp(kWork / "stderr.txt").find("schema") != std::string::npos);

    const std::string model_bytes = slurp(kWork / "m.json");
    std::ofstream(kWork / "cut.json", std::ios::binary) << model_bytes.substr(0, model_bytes.size() / 3);
    CHECK(run("score --model " + at("cut.json") + " " + at("corpus")) == 4);
}

TEST_CASE("similarity and dedup")
{
    Workspace ws;
    fs::create_directories(kWork / "in");
    std::ofstream(kWork / "in" / "a.json") << testing::read_data("if_else.json");
    std::ofstream(kWork / "in" / "b.json") << testing::read_data("loops.json");
    // Same function under another file id and node ids.
    FileDocument copy = testing::load_data("if_else.json");
    copy.file_id = "copy";
    std::ofstream(kWork / "in" / "c.json") << serialize(copy);

    REQUIRE(run("similarity " + at("in") + " --out " + at("d.csv")) == 0);
    std::istringstream csv(slurp(kWork / "d.csv"));
    std::string header, row;
    std::getline(csv, header);
    CHECK(std::count(header.begin(), header.end(), ',') == 3);
    std::getline(csv, row);
    CHECK(row.find(",0,") != std::string::npos);

    REQUIRE(run("similarity --graphs --p 1 " + at("in") + " --out " + at("g.csv")) == 0);
    CHECK(slurp(kWork / "g.csv").rfind("id,", 0) == 0);
    CHECK(run("similarity --p 0.5 " + at("in")) == 2);

    REQUIRE(run("dedup " + at("in") + " --out " + at("dd.json")) == 0);
    const Json dd = Json::parse(slurp(kWork / "dd.json"));
    CHECK(dd.at("unique") == 2);
    REQUIRE(dd.at("groups").size() == 1);
    CHECK(dd.at("groups")[0].at("file_ids").size() == 2);
}

TEST_CASE("exit codes")
{
    Workspace ws;
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("vectorize") == 2);
    CHECK(run("train --vectors x.jsonl") == 2);
    CHECK(run("vectorize --mode both " + testing::data_path("if_else.json")) == 2);
    CHECK(run("vectorize " + at("nope.json")) == 4);

    std::ofstream(kWork / "bad.json") << R"({"file_id":"x","functions":[{"name": }]})";
    CHECK(run("vectorize " + at("bad.json")) == 3);
    CHECK(slurp(kWork / "stderr.txt").find("byte") != std::string::npos);
    std::ofstream(kWork / "dangling.json")
        << R"({"file_id":"x","functions":[{"name":"f","nodes":{"5":{"type":"BinaryOp","left":"9"}}}]})";
    CHECK(run("vectorize " + at("dangling.json")) == 3);
    CHECK(slurp(kWork / "stderr.txt").find("'9'") != std::string::npos);

    // One bad input among good ones is skipped, not fatal.
    CHECK(run("vectorize " + at("bad.json") + " " + testing::data_path("if_else.json")) == 0);
    CHECK(slurp(kWork / "stderr.txt").find("skipping") != std::string::npos);

    std::ofstream(kWork / "cfg.json") << R"({"colour": 1})";
    CHECK(run("vectorize --config " + at("cfg.json") + " " + testing::data_path("if_else.json")) == 4);
    std::ofstream(kWork / "cfg2.json") << R"({"mode": )";
    CHECK(run("vectorize --config " + at("cfg2.json") + " " + testing::data_path("if_else.json")) == 3);
}

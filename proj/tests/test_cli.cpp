#include "rae/cli.hpp"

#include "rae/jsonl.hpp"
#include "rae/kgstore.hpp"
#include "support.hpp"

#include <httplib.h>

#include <gtest/gtest.h>

#include <regex>
#include <sstream>

using namespace rae;
using rae::testing::TempDir;

namespace {

const std::string kData = std::string(RAE_SOURCE_DIR) + "/data/table1/";

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::string table1_question() {
    std::string q = read_text_file(kData + "question.txt");
    while (!q.empty() && q.back() == '\n') q.pop_back();
    return q;
}

}  // namespace

TEST(Cli, BuildKgTable1) {
    TempDir dir;
    const CliRun r = invoke({"build-kg", "--triples", kData + "triples.jsonl", "--edits", kData + "edits.jsonl", "--out",
                       dir.file("kg.jsonl")});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const EditedKG kg = read_kg(dir.file("kg.jsonl"));
    EXPECT_EQ(kg.size(), 5u);
    EXPECT_EQ(kg.edited_count(), 2u);
    EXPECT_NE(r.out.find("5 triples"), std::string::npos);
}

TEST(Cli, RetrievePruneEditPipeline) {
    TempDir dir;
    ASSERT_EQ(invoke({"build-kg", "--triples", kData + "triples.jsonl", "--edits", kData + "edits.jsonl", "--out",
                   dir.file("kg.jsonl")})
                  .code,
              0);
    const std::string q = table1_question();
    const CliRun r = invoke({"retrieve", "--kg", dir.file("kg.jsonl"), "--question", q, "--entity", "Harry Potter", "--hops",
                       "4", "--beam", "2", "--scorer", "mock:" + kData + "scorer.jsonl", "--out",
                       dir.file("retrieved.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json sub = json::parse(read_text_file(dir.file("retrieved.json")));
    ASSERT_EQ(sub["chain"].size(), 3u);
    EXPECT_EQ(sub["chain"][2]["tail"], "Boston");
    EXPECT_TRUE(sub["dead_end"].get<bool>());

    const CliRun p = invoke({"prune", "--question", q, "--chain", dir.file("retrieved.json"), "--scorer",
                       "mock:" + kData + "scorer.jsonl", "--out", dir.file("pruned.json")});
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_EQ(json::parse(read_text_file(dir.file("pruned.json")))["selected_length"], 3);

    const CliRun e = invoke({"edit", "--question", q, "--chain", dir.file("pruned.json"), "--generator",
                       "mock:" + kData + "generator.jsonl", "--target", "Boston"});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_TRUE(json::parse(e.out)["matched"].get<bool>());
}

TEST(Cli, ChainFileAsBareArray) {
    TempDir dir;
    write_text_file(dir.file("chain.json"),
                    R"([{"head":"Harry Potter","relation":"author","tail":"Stephen King"}])");
    const CliRun e = invoke({"edit", "--question", table1_question(), "--chain", dir.file("chain.json"), "--generator",
                       "mock:" + kData + "generator.jsonl", "--target", "Boston"});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_FALSE(json::parse(e.out)["matched"].get<bool>());
}

TEST(Cli, EvalTable1) {
    TempDir dir;
    const CliRun r = invoke({"eval", "--kg", kData + "triples.jsonl", "--dataset", kData + "dataset.jsonl", "--scorer",
                       "mock:" + kData + "scorer.jsonl", "--generator", "mock:" + kData + "generator.jsonl",
                       "--report", dir.file("report.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json rep = json::parse(read_text_file(dir.file("report.json")));
    EXPECT_EQ(rep["aggregates"]["overall"]["edited_accuracy"], 100.0);
    EXPECT_EQ(rep["aggregates"]["overall"]["em"], 100.0);
}

TEST(Cli, ConfigFileWithFlagOverride) {
    TempDir dir;
    const rae::testing::EvalFixture fx = rae::testing::write_eval_fixture(dir);
    write_text_file(dir.file("run.ini"), "[eval]\nkg = \"" + fx.triples + "\"\ndataset = \"" + fx.dataset +
                                             "\"\nscorer = \"mock:" + fx.scorer + "\"\ngenerator = \"mock:" +
                                             fx.generator + "\"\nbeam = 5\nno-prune = true\n");
    const CliRun a = invoke({"--config", dir.file("run.ini"), "eval", "--report", dir.file("a.json")});
    ASSERT_EQ(a.code, 0) << a.err;
    const json ja = json::parse(read_text_file(dir.file("a.json")));
    EXPECT_EQ(ja["config"]["beam_width"], 5);
    EXPECT_EQ(ja["config"]["prune"], false);
    const CliRun b = invoke({"--config", dir.file("run.ini"), "eval", "--beam", "3", "--report", dir.file("b.json")});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(json::parse(read_text_file(dir.file("b.json")))["config"]["beam_width"], 3);
}

TEST(Cli, DpiCheck) {
    const CliRun r = invoke({"dpi-check", "--trials", "1000"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["held"], 1000);
}

TEST(Cli, UnknownFlagPrintsUsage) {
    const CliRun r = invoke({"retrieve", "--bogus"});
    EXPECT_EQ(r.code, cli::kExitInput);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(invoke({}).code, cli::kExitInput);
    EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitInput);
}

TEST(Cli, InputErrorsExitOne) {
    TempDir dir;
    write_text_file(dir.file("bad.jsonl"), "{not json\n");
    EXPECT_EQ(invoke({"build-kg", "--triples", dir.file("bad.jsonl"), "--out", dir.file("o")}).code, cli::kExitInput);
    EXPECT_EQ(invoke({"build-kg", "--triples", dir.file("missing.jsonl"), "--out", dir.file("o")}).code,
              cli::kExitInput);
    EXPECT_EQ(invoke({"retrieve", "--kg", kData + "triples.jsonl", "--question", "q", "--entity", "Harry Potter",
                   "--scorer", "bogus"})
                  .code,
              cli::kExitInput);
}

TEST(Cli, BackendErrorsExitTwo) {
    TempDir dir;
    ASSERT_EQ(invoke({"build-kg", "--triples", kData + "triples.jsonl", "--out", dir.file("kg.jsonl")}).code, 0);
    int port;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    const CliRun r = invoke({"retrieve", "--kg", dir.file("kg.jsonl"), "--question", "q", "--entity", "Harry Potter",
                       "--scorer", "remote:http://127.0.0.1:" + std::to_string(port), "--max-retries", "2",
                       "--timeout-ms", "300"});
    EXPECT_EQ(r.code, cli::kExitBackend) << r.err;
}

TEST(Cli, BinaryRuns) {
    TempDir dir;
    const std::string cmd = std::string(RAE_CLI_PATH) + " dpi-check --trials 20 > " + dir.file("o.txt");
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_NE(read_text_file(dir.file("o.txt")).find("\"held\":20"), std::string::npos);
}

// The CLI is a thin adapter: no scoring, search, entropy or metric code.
TEST(Architecture, CliHoldsNoMathOrSearch) {
    for (const std::string file : {"/src/cli.cpp", "/tools/rae.cpp", "/include/rae/cli.hpp"}) {
        const std::string src = read_text_file(std::string(RAE_SOURCE_DIR) + file);
        for (const std::string banned :
             {"<cmath>", "log2", "exp2", "std::log", "std::exp", "sqrt", "std::sort", "priority_queue", "partial_sort",
              "sequence_logprob", "next_token_dist", "outgoing(", "percent(", "normalized_entropy", "mutual_information",
              "Eigen", "ranks_before", "retrieval_metrics", "check_edited_answer"}) {
            EXPECT_EQ(src.find(banned), std::string::npos) << file << " contains " << banned;
        }
        EXPECT_FALSE(std::regex_search(src, std::regex(R"(\bfor\s*\()"))) << file << " loops";
        EXPECT_FALSE(std::regex_search(src, std::regex(R"(\bwhile\s*\()"))) << file << " loops";
    }
}

#include "cli.hpp"

#include "logiccar/hierarchy.hpp"
#include "logiccar/label_space.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <sstream>

namespace logiccar {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// A fast spec: 3-dimensional halves, few samples.
constexpr const char* kSmallSpec = R"({"half_dim": 3, "samples_per_composition": 4, "eval_samples_per_composition": 2})";
constexpr const char* kSmallRun =
    R"({"data": {"half_dim": 3, "samples_per_composition": 4, "eval_samples_per_composition": 2},
        "train": {"epochs": 3, "batch_size": 32}})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv("LOGICCAR_LLM_ENDPOINT");
    ::unsetenv("LOGICCAR_LLM_KEY");
  }
  TempDir dir{"cli"};
  std::string path(const std::string& p) const { return (dir / p).string(); }
  void gen(const std::string& out) {
    write_text_file(dir / "spec.json", kSmallSpec);
    const Result r = run({"gen-data", "--spec", path("spec.json"), "--out", path(out)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
};

TEST_F(Cli, GenDataWritesFilesAndCounts) {
  const Result r = run({"gen-data", "--out", path("d")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"labelspace.json", "hierarchy.json", "dataset.csv", "spec.json"})
    EXPECT_TRUE(fs::exists(dir / "d" / f)) << f;
  EXPECT_NE(r.out.find("seen: 28 compositions"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("unseen_val: 6 compositions"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("unseen_test: 6 compositions"), std::string::npos) << r.out;
}

TEST_F(Cli, GenDataIsByteIdentical) {
  gen("a");
  gen("b");
  for (const char* f : {"labelspace.json", "hierarchy.json", "dataset.csv", "spec.json"})
    EXPECT_EQ(read_text_file(dir / "a" / f), read_text_file(dir / "b" / f)) << f;
}

TEST_F(Cli, MissingSpecNamesPath) {
  const Result r = run({"gen-data", "--spec", path("missing.json"), "--out", path("d")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.json"), std::string::npos) << r.err;
}

TEST_F(Cli, InvalidSpecAndUsage) {
  write_text_file(dir / "bad.json", R"({"num_compositions": 2})");
  EXPECT_EQ(run({"gen-data", "--spec", path("bad.json"), "--out", path("d")}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"gen-data"}).code, 2);
}

TEST_F(Cli, HeuristicHierarchyMatchesGroundTruth) {
  gen("d");
  const Result r = run({"build-hierarchy", "--labelspace", path("d/labelspace.json"), "--out", path("h.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const LabelSpace ls = label_space_from_json(read_text_file(dir / "d/labelspace.json"));
  EXPECT_EQ(read_hierarchy(dir / "h.json", ls), read_hierarchy(dir / "d/hierarchy.json", ls));
}

TEST_F(Cli, FallGrouping) {
  const LabelSpace ls = testing::small_label_space();
  write_label_space(dir / "ls.json", ls);
  fs::create_directories(dir / "votes");
  for (int t = 0; t < 19; ++t)
    write_text_file(dir / "votes" / ("trial_" + std::to_string(100 + t) + ".json"),
                    R"({"napkin": ")" + std::string(t < 12 ? "tableware" : "textile") +
                        R"(", "plate": "tableware", "coat": "clothing", "hat": "clothing"})");
  const Result r = run({"build-hierarchy", "--labelspace", path("ls.json"), "--mode", "votes", "--votes",
                        path("votes"), "--out", path("h.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_hierarchy(dir / "h.json", ls), testing::small_hierarchy());
}

TEST_F(Cli, LlmWithoutEndpointOrCacheFails) {
  gen("d");
  const Result r = run({"build-hierarchy", "--labelspace", path("d/labelspace.json"), "--mode", "llm", "--cache",
                        path("cache"), "--out", path("h.json")});
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_FALSE(fs::exists(dir / "h.json"));
}

TEST_F(Cli, LlmReplaysCacheOffline) {
  const LabelSpace ls = testing::small_label_space();
  write_label_space(dir / "ls.json", ls);
  const std::map<std::string, std::string> answer{
      {"napkin", "tableware"}, {"plate", "tableware"}, {"coat", "clothing"}, {"hat", "clothing"}};
  for (const auto& [object, coarse] : answer)
    for (int t = 0; t < 19; ++t)
      write_text_file(cache_file(dir / "cache", object, t), "A: " + object + " belongs to " + coarse + ".");
  const std::vector<std::string> args{"build-hierarchy", "--labelspace", path("ls.json"), "--mode", "llm",
                                      "--cache", path("cache"), "--out", path("h.json")};
  const Result r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_hierarchy(dir / "h.json", ls), testing::small_hierarchy());
  const std::string first = read_text_file(dir / "h.json");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(read_text_file(dir / "h.json"), first);
}

TEST_F(Cli, InvalidHierarchyExitsThree) {
  const LabelSpace ls = testing::small_label_space();
  write_label_space(dir / "ls.json", ls);
  fs::create_directories(dir / "votes");
  write_text_file(dir / "votes/t.json", R"({"napkin": "a", "plate": "b", "coat": "c"})");
  const Result r = run({"build-hierarchy", "--labelspace", path("ls.json"), "--mode", "votes", "--votes",
                        path("votes"), "--out", path("h.json")});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(Cli, TrainThenEval) {
  gen("d");
  write_text_file(dir / "run.json", R"({"paths": {"data_dir": ")" + path("d") + R"("}, "train": {"epochs": 3, "batch_size": 32}})");
  Result r = run({"train", "--config", path("run.json"), "--out", path("t")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"checkpoint.json", "history.csv", "config.json", "validation.csv"})
    EXPECT_TRUE(fs::exists(dir / "t" / f)) << f;
  r = run({"eval", "--checkpoint", path("t/checkpoint.json"), "--data", path("d"), "--out", path("e")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(read_text_file(dir / "e/report.json"));
  for (const char* key : {"verb", "object", "seen", "unseen", "hm", "auc"}) {
    ASSERT_TRUE(report.contains(key)) << key;
    EXPECT_GE(report[key].get<double>(), 0.0);
    EXPECT_LE(report[key].get<double>(), 1.0);
  }
  EXPECT_EQ(read_text_file(dir / "e/curve.csv").substr(0, 23), "bias,seen_acc,unseen_ac");
  EXPECT_TRUE(fs::exists(dir / "e/curve.svg"));
  EXPECT_EQ(run({"eval", "--checkpoint", path("t/checkpoint.json"), "--data", path("d"), "--split", "train",
                 "--out", path("e")})
                .code,
            2);
}

TEST_F(Cli, TrainRerunIsByteIdentical) {
  write_text_file(dir / "run.json", kSmallRun);
  for (const char* out : {"a", "b"}) ASSERT_EQ(run({"train", "--config", path("run.json"), "--out", path(out)}).code, 0);
  for (const char* f : {"checkpoint.json", "history.csv", "config.json", "validation.csv"})
    EXPECT_EQ(read_text_file(dir / "a" / f), read_text_file(dir / "b" / f)) << f;
  ASSERT_EQ(run({"train", "--config", path("run.json"), "--out", path("c"), "--seed", "9"}).code, 0);
  EXPECT_NE(read_text_file(dir / "a/history.csv"), read_text_file(dir / "c/history.csv"));
}

TEST_F(Cli, DottedOverridesAndUnknownKeys) {
  write_text_file(dir / "run.json", kSmallRun);
  Result r = run({"train", "--config", path("run.json"), "--out", path("t"), "--train.epochs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(read_text_file(dir / "t/config.json"))["train"]["epochs"], 1);
  r = run({"train", "--config", path("run.json"), "--out", path("t"), "--train.epohcs", "1"});
  EXPECT_EQ(r.code, 2);
  write_text_file(dir / "typo.json", R"({"train": {"lerning_rate": 0.1}})");
  EXPECT_EQ(run({"train", "--config", path("typo.json"), "--out", path("t")}).code, 2);
}

TEST_F(Cli, AblateWritesFourArms) {
  write_text_file(dir / "run.json", kSmallRun);
  const Result r = run({"ablate", "--config", path("run.json"), "--seeds", "3", "--out", path("ab")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string json = read_text_file(dir / "ab/ablation.json");
  for (const char* arm : {"none", "ecl", "hpl", "both"}) {
    EXPECT_NE(json.find(std::string("\"") + arm + "\""), std::string::npos) << arm;
    EXPECT_TRUE(fs::is_directory(dir / "ab" / arm)) << arm;
  }
  EXPECT_NE(run({"ablate", "--config", path("run.json"), "--seeds", "2", "--out", path("ab2")}).code, 0);
}

TEST_F(Cli, RulesCheckPasses) {
  gen("d");
  const Result r = run({"rules", "check", "--labelspace", path("d/labelspace.json"), "--hierarchy",
                        path("d/hierarchy.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("max |closed form - generic| = "), std::string::npos) << r.out;
}

TEST_F(Cli, RulesCheckCustomFile) {
  gen("d");
  write_text_file(dir / "bad.logic", "forall x (verb:nonexistent(x))\n");
  EXPECT_EQ(run({"rules", "check", "--labelspace", path("d/labelspace.json"), "--hierarchy",
                 path("d/hierarchy.json"), "--rules", path("bad.logic")})
                .code,
            3);
}

}  // namespace
}  // namespace logiccar

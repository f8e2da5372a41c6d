#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "temp_dir.hpp"
#include "transduct/tensor_io.hpp"

namespace transduct::cli {
namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "transduct");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const Outcome o = invoke({"bench", "--n", "300", "--k", "4", "--d", "16", "--seed", "2", "--save-dir",
                              dir_.path().string()});
    ASSERT_EQ(o.code, kExitOk) << o.err;
  }
  std::string path(const char* name) const { return (dir_ / name).string(); }

  testing_support::TempDir dir_;
};

TEST_F(CliTest, SolveWritesPredictionsAndReport) {
  const Outcome o = invoke({"solve", "--images", path("images.rste"), "--texts", path("texts.rste"), "--labels",
                            path("labels.rste"), "--out", path("pred.csv"), "--report", path("r.json")});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_NE(o.out.find("inductive top-1:"), std::string::npos);
  EXPECT_NE(o.out.find("transductive top-1:"), std::string::npos);
  EXPECT_EQ(load_predictions(path("pred.csv")).pred.size(), 300u);
  std::ifstream in(path("r.json"));
  const auto j = nlohmann::json::parse(in);
  EXPECT_FALSE(j["delta"].is_null());
}

TEST_F(CliTest, PseudoLabelReportsInductiveOnly) {
  const Outcome o = invoke({"pseudo-label", "--images", path("images.rste"), "--texts", path("texts.rste"),
                            "--labels", path("labels.rste"), "--report", path("r.json")});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  std::ifstream in(path("r.json"));
  const auto j = nlohmann::json::parse(in);
  EXPECT_TRUE(j["inductive_top1"].is_number());
  EXPECT_TRUE(j["transductive_top1"].is_null());
}

TEST_F(CliTest, MissingRequiredFlagIsUsageError) {
  const Outcome o = invoke({"solve", "--images", path("images.rste")});
  EXPECT_EQ(o.code, kExitUsage);
  EXPECT_NE(o.err.find("--texts"), std::string::npos) << o.err;
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"solve", "--images", path("images.rste"), "--texts", path("texts.rste"), "--tau", "-1"}).code,
            kExitUsage);
  EXPECT_EQ(invoke({"solve", "--images", path("images.rste"), "--texts", path("texts.rste"), "--affinity", "x"}).code,
            kExitUsage);
}

TEST_F(CliTest, BadDataIsDataError) {
  std::ofstream(path("junk.rste")) << "not a tensor";
  EXPECT_EQ(invoke({"solve", "--images", path("junk.rste"), "--texts", path("texts.rste")}).code, kExitData);
  EXPECT_EQ(invoke({"solve", "--images", path("images.rste"), "--texts", path("labels.rste")}).code, kExitData);
  EXPECT_EQ(invoke({"solve", "--images", path("texts.rste"), "--texts", path("texts.rste"), "--labels",
                    path("labels.rste")})
                .code,
            kExitData);
}

TEST_F(CliTest, ThreadCountDoesNotChangeOutputBytes) {
  const std::vector<std::string> base{"solve", "--images", path("images.rste"), "--texts", path("texts.rste")};
  auto with = [&](const char* threads, const char* out) {
    auto args = base;
    for (const char* a : {"--threads", threads, "--out", out}) args.emplace_back(a);
    args.back() = path(out);
    return invoke(args).code;
  };
  ASSERT_EQ(with("1", "p1.csv"), kExitOk);
  ASSERT_EQ(with("8", "p8.csv"), kExitOk);
  ASSERT_EQ(with("1", "p1b.csv"), kExitOk);
  EXPECT_EQ(slurp(path("p1.csv")), slurp(path("p8.csv")));
  EXPECT_EQ(slurp(path("p1.csv")), slurp(path("p1b.csv")));
}

TEST_F(CliTest, BenchPrintsBothAccuracies) {
  const Outcome o = invoke({"bench", "--n", "400", "--k", "3", "--d", "16", "--seed", "1"});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_NE(o.out.find("bench n=400 k=3 d=16 seed=1"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("inductive top-1:"), std::string::npos);
  EXPECT_NE(o.out.find("delta:"), std::string::npos);
}

TEST_F(CliTest, EnsembleAveragesPromptFiles) {
  Matrix a(2, 2), b(1, 2);
  a << 1, 0, 0, 1;
  b << 0, 3;
  save_matrix(a, TensorKind::kText, path("c0.rste"));
  save_matrix(b, TensorKind::kText, path("c1.rste"));
  const Outcome o = invoke({"ensemble", "--prompts", path("c0.rste"), path("c1.rste"), "--out", path("t.npy"),
                            "--format", "npy"});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const ClassEmbeddings t = load_class_embeddings(path("t.npy"), {.normalize = false});
  EXPECT_EQ(t.k(), 2u);
  EXPECT_NEAR(t.data()(0, 0), 0.70710678, 1e-7);
  EXPECT_NEAR(t.data()(1, 1), 1.0, 1e-7);

  EXPECT_EQ(invoke({"ensemble", "--prompts", path("c0.rste"), "--out", path("t.npy")}).code, kExitUsage);
}

}  // namespace
}  // namespace transduct::cli

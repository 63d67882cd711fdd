#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ocgec/harness/experiment.hpp"
#include "ocgec/io/blob_file.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI inside `dir`, capturing stdout; stderr is discarded.
Result run(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" OCGEC_CLI "' " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "ocgec-cli-test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.json") << R"({
      "seed": 3, "threads": 1, "output_dir": "run",
      "dataset": {"samples_per_class": 20, "eval_per_class": 4, "clean_fraction": 0.25},
      "zoo": {"train_benign": 6, "test_benign": 3, "test_backdoor": 3,
              "benign_grid": {"epochs": [1], "lrs": [0.003]},
              "backdoor_grid": {"epochs": [1], "lrs": [0.003]}},
      "gae": {"encoder_widths": [8, 4], "decoder_hidden": [8], "epochs": 2, "batch_size": 4},
      "occ": {"nu": 0.25, "max_epochs": 3, "batch_size": 4}
    })";
  }
  static fs::path dir_;
};
fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, ZooWritesModelsAndManifest) {
  const Result r = run(dir_, "zoo -c tiny.json --count 4 --role benign -o zoo4");
  ASSERT_EQ(r.code, 0);
  std::size_t tmod = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "zoo4")) tmod += e.path().extension() == ".tmod" ? 1 : 0;
  EXPECT_EQ(tmod, 4u);
  EXPECT_EQ(lines(ocgec::io::read_text_file(dir_ / "zoo4" / "manifest.jsonl")).size(), 4u);
}

TEST_F(Cli, StagesChainAndDetectKeepsTrainingCoverage) {
  ASSERT_EQ(run(dir_, "zoo -c tiny.json --count 8 -o zoo8").code, 0);
  ASSERT_EQ(run(dir_, "convert -c tiny.json -o graphs8 zoo8").code, 0);
  ASSERT_EQ(run(dir_, "pretrain -c tiny.json -o m/pre.gae graphs8").code, 0);
  ASSERT_EQ(run(dir_, "fit -c tiny.json --gae m/pre.gae -o m/sphere.occ graphs8").code, 0);
  const Result d = run(dir_, "detect --sphere m/sphere.occ graphs8");
  ASSERT_EQ(d.code, 0);
  const auto rows = lines(d.out);
  ASSERT_EQ(rows.size(), 8u);
  std::size_t benign = 0;
  for (const std::string& row : rows) {
    const auto t1 = row.find('\t'), t2 = row.rfind('\t');
    ASSERT_NE(t1, t2) << row;
    const double score = std::stod(row.substr(t1 + 1, t2 - t1 - 1));
    const std::string verdict = row.substr(t2 + 1);
    EXPECT_EQ(verdict == "backdoor", score > 0.0);
    benign += verdict == "benign" ? 1 : 0;
  }
  EXPECT_GE(benign, 6u);  // ceil((1 - 0.25) * 8)
}

TEST_F(Cli, EvalReprintsStoredAuc) {
  const Result run1 = run(dir_, "eval -c tiny.json -o evalrun");
  ASSERT_EQ(run1.code, 0);
  const Result again = run(dir_, "eval --report evalrun/report.json");
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(again.out, run1.out);
  EXPECT_EQ(again.out, ocgec::harness::format_number(ocgec::harness::load_report(dir_ / "evalrun" / "report.json").auc) +
                           "\n");
}

TEST_F(Cli, SweepPrintsOneRowPerValue) {
  const Result r = run(dir_, "sweep -c tiny.json -o sweep --axis encoder-widths --values 8x4,6");
  ASSERT_EQ(r.code, 0);
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "value,auc,status");
  EXPECT_EQ(rows[1].rfind("8x4,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("6,", 0), 0u);
}

TEST_F(Cli, ValidationErrorsExitWithOne) {
  EXPECT_EQ(run(dir_, "eval --bogus").code, 1);
  EXPECT_EQ(run(dir_, "").code, 1);
  EXPECT_EQ(run(dir_, "eval -c tiny.json --set zoo.test_backdoor=0").code, 1);
  EXPECT_EQ(run(dir_, "eval -c tiny.json --set occ.unknown=1").code, 1);
  std::ofstream(dir_ / "bad.json") << "{not json";
  EXPECT_EQ(run(dir_, "eval -c bad.json").code, 1);
  EXPECT_EQ(run(dir_, "zoo -c tiny.json --count 2 --role sideways").code, 1);
}

TEST_F(Cli, RuntimeFailuresExitWithTwo) {
  std::ofstream(dir_ / "broken.occ") << "{\"not\": \"a sphere\"}";
  ASSERT_EQ(run(dir_, "zoo -c tiny.json --count 1 -o zoo1").code, 0);
  EXPECT_EQ(run(dir_, "detect --sphere broken.occ zoo1").code, 2);
}

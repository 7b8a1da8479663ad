#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cnet/manifest.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

/// Runs the installed binary with `args` inside `cwd`.
RunResult run_cli(const std::string& args, const fs::path& cwd) {
    fs::create_directories(cwd);
    const std::string cmd = "cd '" + cwd.string() + "' && '" + CNET_CLI_PATH + "' " + args +
                            " > _stdout 2> _stderr";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(cwd / "_stdout");
    r.err = slurp(cwd / "_stderr");
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> checkpoint_files(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".ckpt") {
            out.push_back(entry.path().filename().string());
        }
    }
    return out;
}

TEST(CliSynth, OnePerClassYieldsSixtySplitRecords) {
    const auto dir = fresh_dir("cnet_cli_synth1");
    const auto r = run_cli("synth --per-class 1 --seed 3 --out data --image-size 16", dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto samples = cnet::parse_manifest(dir / "data" / "manifest.tsv");
    EXPECT_EQ(samples.size(), 60u);
    EXPECT_TRUE(cnet::has_explicit_splits(samples));
}

TEST(CliSynth, RerunIsByteIdentical) {
    const auto dir = fresh_dir("cnet_cli_synth2");
    ASSERT_EQ(run_cli("synth --per-class 1 --seed 5 --out a --image-size 16", dir).exit_code, 0);
    ASSERT_EQ(run_cli("synth --per-class 1 --seed 5 --out b --image-size 16", dir).exit_code, 0);
    EXPECT_EQ(slurp(dir / "a" / "manifest.tsv"), slurp(dir / "b" / "manifest.tsv"));
    EXPECT_EQ(slurp(dir / "a" / "thai_sweet_0.ppm"), slurp(dir / "b" / "thai_sweet_0.ppm"));
    EXPECT_EQ(slurp(dir / "a" / "greek_sour_0.ppm"), slurp(dir / "b" / "greek_sour_0.ppm"));
}

TEST(CliSynth, EightPerClassSplitsEachCuisineNearSeventyFifteenFifteen) {
    const auto dir = fresh_dir("cnet_cli_synth8");
    const auto r = run_cli("synth --per-class 8 --seed 1 --out data --image-size 16", dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto samples = cnet::parse_manifest(dir / "data" / "manifest.tsv");
    ASSERT_EQ(samples.size(), 480u);
    std::map<std::int64_t, std::map<cnet::Split, int>> counts;
    for (const auto& s : samples) {
        ++counts[s.cuisine][s.split];
    }
    for (const auto& [cuisine, by_split] : counts) {
        int total = 0;
        for (const auto& [split, n] : by_split) {
            total += n;
        }
        ASSERT_EQ(total, 48) << "cuisine " << cuisine;
        EXPECT_NEAR(by_split.at(cnet::Split::kTrain), 48 * 0.70, 1.0);
        EXPECT_NEAR(by_split.at(cnet::Split::kVal), 48 * 0.15, 1.0);
        EXPECT_NEAR(by_split.at(cnet::Split::kTest), 48 * 0.15, 1.0);
    }
}

class CliTrainFixture : public ::testing::Test {
protected:
    // One shared tiny dataset; each test trains into its own run directory.
    static void SetUpTestSuite() {
        dir_ = new fs::path(fresh_dir("cnet_cli_train"));
        const auto r =
            run_cli("synth --per-class 1 --seed 3 --out data --image-size 16", *dir_);
        ASSERT_EQ(r.exit_code, 0) << r.err;
        std::ofstream cfg(*dir_ / "tiny.cfg");
        cfg << "manifest = data/manifest.tsv\n"
               "input_size = 16\n"
               "width_multiplier = 1/32\n"
               "pool_scales = 1\n"
               "dropout = 0\n"
               "batch_size = 16\n"
               "base_lr = 0.005\n";
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static fs::path* dir_;
};

fs::path* CliTrainFixture::dir_ = nullptr;

TEST_F(CliTrainFixture, MissingManifestExitsWithConfigCodeNamingTheKey) {
    const auto r = run_cli("train --set epochs=1", *dir_);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("manifest"), std::string::npos) << r.err;
}

TEST_F(CliTrainFixture, OneEpochWritesExactlyOneCheckpoint) {
    const auto r = run_cli(
        "train --config tiny.cfg --set out_dir=run_one --set epochs=1 --seed 7", *dir_);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(checkpoint_files(*dir_ / "run_one"),
              std::vector<std::string>{"final.ckpt"});
    EXPECT_TRUE(fs::exists(*dir_ / "run_one" / "config.txt"));
    EXPECT_TRUE(fs::exists(*dir_ / "run_one" / "train.log"));
    EXPECT_TRUE(fs::exists(*dir_ / "run_one" / "report.txt"));
    EXPECT_TRUE(fs::exists(*dir_ / "run_one" / "report.kv"));
}

TEST_F(CliTrainFixture, CheckpointCadenceSkipsTheFinalEpochDuplicate) {
    const auto r = run_cli(
        "train --config tiny.cfg --set out_dir=run_cad --set epochs=3 "
        "--set checkpoint_every=1 --seed 7",
        *dir_);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    auto files = checkpoint_files(*dir_ / "run_cad");
    std::sort(files.begin(), files.end());
    EXPECT_EQ(files, (std::vector<std::string>{"epoch_0001.ckpt", "epoch_0002.ckpt",
                                               "final.ckpt"}));
}

TEST_F(CliTrainFixture, IdenticalRunsProduceIdenticalArtifacts) {
    const std::string args =
        "train --config tiny.cfg --set out_dir=run_rep --set epochs=2 --seed 11";
    ASSERT_EQ(run_cli(args, *dir_).exit_code, 0);
    const std::string log1 = slurp(*dir_ / "run_rep" / "train.log");
    const std::string rep1 = slurp(*dir_ / "run_rep" / "report.txt");
    const std::string kv1 = slurp(*dir_ / "run_rep" / "report.kv");
    const std::string ckpt1 = slurp(*dir_ / "run_rep" / "final.ckpt");
    ASSERT_EQ(run_cli(args, *dir_).exit_code, 0);
    EXPECT_EQ(slurp(*dir_ / "run_rep" / "train.log"), log1);
    EXPECT_EQ(slurp(*dir_ / "run_rep" / "report.txt"), rep1);
    EXPECT_EQ(slurp(*dir_ / "run_rep" / "report.kv"), kv1);
    EXPECT_EQ(slurp(*dir_ / "run_rep" / "final.ckpt"), ckpt1);

    // A different seed must change the trained weights.
    ASSERT_EQ(run_cli("train --config tiny.cfg --set out_dir=run_rep2 --set epochs=2 "
                      "--seed 12",
                      *dir_)
                  .exit_code,
              0);
    EXPECT_NE(slurp(*dir_ / "run_rep2" / "train.log"), log1);
}

TEST_F(CliTrainFixture, EchoedConfigReproducesTheRun) {
    ASSERT_EQ(run_cli("train --config tiny.cfg --set out_dir=run_echo --set epochs=2 "
                      "--seed 21",
                      *dir_)
                  .exit_code,
              0);
    const std::string ckpt1 = slurp(*dir_ / "run_echo" / "final.ckpt");
    const std::string cfg1 = slurp(*dir_ / "run_echo" / "config.txt");
    ASSERT_EQ(run_cli("train --config run_echo/config.txt", *dir_).exit_code, 0);
    EXPECT_EQ(slurp(*dir_ / "run_echo" / "final.ckpt"), ckpt1);
    EXPECT_EQ(slurp(*dir_ / "run_echo" / "config.txt"), cfg1);
}

TEST_F(CliTrainFixture, EvalPrintsTheReportAndRejectsEmptySplits) {
    ASSERT_EQ(run_cli("train --config tiny.cfg --set out_dir=run_eval --set epochs=1 "
                      "--seed 31",
                      *dir_)
                  .exit_code,
              0);
    const auto ok = run_cli(
        "eval --checkpoint run_eval/final.ckpt --manifest data/manifest.tsv --split val",
        *dir_);
    ASSERT_EQ(ok.exit_code, 0) << ok.err;
    EXPECT_NE(ok.out.find("Precision    Recall  F1 score"), std::string::npos) << ok.out;
    EXPECT_NE(ok.out.find("Cuisine classification"), std::string::npos);
    EXPECT_NE(ok.out.find("Flavour analysis"), std::string::npos);
    EXPECT_NE(ok.out.find("Averaged"), std::string::npos);

    // A manifest whose rows are all train has nothing in its test split.
    auto samples = cnet::parse_manifest(*dir_ / "data" / "manifest.tsv");
    for (auto& s : samples) {
        s.split = cnet::Split::kTrain;
    }
    cnet::write_manifest(*dir_ / "data" / "train_only.tsv", samples);
    const auto bad = run_cli(
        "eval --checkpoint run_eval/final.ckpt --manifest data/train_only.tsv --split test",
        *dir_);
    EXPECT_EQ(bad.exit_code, 3);
    EXPECT_NE(bad.err.find("holds no samples"), std::string::npos) << bad.err;
}

TEST_F(CliTrainFixture, PredictPrintsOneLabelAndProbabilityPerHead) {
    ASSERT_EQ(run_cli("train --config tiny.cfg --set out_dir=run_pred --set epochs=1 "
                      "--seed 41",
                      *dir_)
                  .exit_code,
              0);
    const auto r = run_cli(
        "predict --checkpoint run_pred/final.ckpt --image data/italian_sweet_0.ppm", *dir_);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    float pc = -1.0f;
    float pf = -1.0f;
    char cuisine[32] = {0};
    char flavor[32] = {0};
    ASSERT_EQ(std::sscanf(r.out.c_str(), "cuisine: %31s p=%f\nflavor: %31s p=%f", cuisine, &pc,
                          flavor, &pf),
              4)
        << r.out;
    EXPECT_GT(pc, 0.0f);
    EXPECT_LE(pc, 1.0f);
    EXPECT_GT(pf, 0.0f);
    EXPECT_LE(pf, 1.0f);

    std::ofstream(*dir_ / "corrupt.ppm") << "not a ppm";
    const auto bad = run_cli("predict --checkpoint run_pred/final.ckpt --image corrupt.ppm",
                             *dir_);
    EXPECT_EQ(bad.exit_code, 3);
}

TEST(CliInspect, DefaultTraceHasTwentyTwoRowsEndingAtTheFlavorHead) {
    const auto dir = fresh_dir("cnet_cli_inspect");
    const auto r = run_cli("inspect", dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line;
    std::string last;
    int rows = 0;
    while (std::getline(lines, line)) {
        if (!line.empty()) {
            ++rows;
            last = line;
        }
    }
    EXPECT_EQ(rows, 22);
    EXPECT_EQ(last, "FC_F: n x 6");

    const auto small = run_cli("inspect --set input_size=112", dir);
    ASSERT_EQ(small.exit_code, 0);
    EXPECT_NE(small.out.find("7 x 7"), std::string::npos) << small.out;

    const auto bad = run_cli("inspect --set input_size=100", dir);
    EXPECT_EQ(bad.exit_code, 2);
}

TEST(CliParse, UnknownFlagsAndMissingSubcommandsAreConfigErrors) {
    const auto dir = fresh_dir("cnet_cli_parse");
    EXPECT_EQ(run_cli("", dir).exit_code, 2);
    EXPECT_EQ(run_cli("synth --out x --bogus 1", dir).exit_code, 2);
    EXPECT_EQ(run_cli("train --set epochs", dir).exit_code, 2);
    EXPECT_EQ(run_cli("--help", dir).exit_code, 0);
}

}  // namespace

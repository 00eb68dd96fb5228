#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kdseq/cli.hpp"

using namespace kdseq;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(Cli, NoArgumentsPrintsUsage) {
  const auto r = cli({});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
}

TEST(Cli, UnknownSubcommandOrFlag) {
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"gen-data", "--out", "x", "--bogus"}).code, 1);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(cli({"--help"}).code, 0); }

TEST(Cli, SmallPipeline) {
  const fs::path dir = fs::temp_directory_path() / "kdseq_test_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "toy.cfg") << "vocab_size = 16\nsynonym_classes = 4\nmin_length = 3\nmax_length = 5\n"
                                    "num_sentences = 40\nnum_dev = 8\nnum_test = 8\n";
  std::ofstream(dir / "model.cfg") << "layers = 1\nhidden = 6\nembed_dim = 6\ndropout_rate = 0\n";
  const std::string data = (dir / "data").string();

  auto r = cli({"gen-data", "--config", (dir / "toy.cfg").string(), "--out", data, "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "data" / "train.src"), 40u);
  EXPECT_EQ(line_count(dir / "data" / "test.tgt"), 8u);

  r = cli({"train", "--train", data + "/train", "--dev", data + "/dev", "--save", (dir / "m.ckpt").string(),
           "--model-config", (dir / "model.cfg").string(), "--epochs", "1", "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(dir / "m.ckpt"));

  r = cli({"translate", "--model", (dir / "m.ckpt").string(), "--input", data + "/test.src", "--beam", "3",
           "--output", (dir / "out.tgt").string(), "--vocab-dir", data});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "out.tgt"), 8u);

  r = cli({"evaluate", "--mode", "bleu", "--hyp", data + "/test.tgt", "--ref", data + "/test.tgt"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("BLEU = 100.00"), std::string::npos) << r.out;

  r = cli({"distill-data", "--mode", "seq-kd", "--teacher", (dir / "m.ckpt").string(), "--input", data + "/dev",
           "--out", (dir / "kd").string(), "--beam", "2", "--vocab-dir", data});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "kd.src"), 8u);
  EXPECT_EQ(line_count(dir / "kd.tgt"), 8u);

  r = cli({"prune", "--model", (dir / "m.ckpt").string(), "--save", (dir / "p.ckpt").string(), "--fraction", "0.5",
           "--no-retrain", "--vocab-dir", data});
  ASSERT_EQ(r.code, 0) << r.err;

  r = cli({"bench", "--model", (dir / "m.ckpt").string(), "--input", data + "/test.src", "--reps", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
}

TEST(Cli, MissingFileIsARuntimeError) {
  const auto r = cli({"translate", "--model", "/nonexistent.ckpt", "--input", "/nonexistent.src", "--output",
                      "/tmp/kdseq_never.tgt", "--vocab-dir", "/nonexistent"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

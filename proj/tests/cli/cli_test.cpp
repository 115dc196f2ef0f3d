#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "glamor/dataset.hpp"
#include "glamor/model.hpp"
#include "glamor/model_config.hpp"
#include "glamor/random.hpp"
#include "glamor/reid_eval.hpp"
#include "glamor/tensor_io.hpp"
#include "glamor/text_format.hpp"

namespace fs = std::filesystem;

namespace glamor {
namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("glamor_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args, const std::string& env = "") const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = env + " '" GLAMOR_KIT_EXE "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

  fs::path dir_;
};

TEST_F(Cli, EvalPerfectRetrieval) {
  write("q.tsv", "#reid-embeddings v1 dim=2\nq0\t1\t0\t0 0\n");
  write("g.tsv", "#reid-embeddings v1 dim=2\ng0\t1\t1\t0.1 0\ng1\t2\t1\t5 5\ng2\t3\t1\t6 6\n");
  const Outcome r = run("eval --query " + path("q.tsv") + " --gallery " + path("g.tsv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("map=1.000000 rank1=1.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("rank5="), std::string::npos);
}

TEST_F(Cli, EvalFiveSixths) {
  write("q.tsv", "#reid-embeddings v1 dim=1\nq0\t7\t0\t0\n");
  write("g.tsv", "#reid-embeddings v1 dim=1\ng0\t7\t1\t1\ng1\t8\t1\t2\ng2\t7\t1\t3\ng3\t9\t1\t4\n");
  const Outcome r = run("eval --protocol plain --query " + path("q.tsv") + " --gallery " + path("g.tsv") +
                    " --out " + path("report.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("map=0.833333"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(path("report.txt")), r.out);
}

TEST_F(Cli, EvalRandomMatchesLibrary) {
  EmbeddingSet q, g;
  Rng rng(3);
  q.vectors = Matrix(15, 4);
  g.vectors = Matrix(60, 4);
  for (double& v : q.vectors.data()) v = rng.normal();
  for (double& v : g.vectors.data()) v = rng.normal();
  for (std::size_t i = 0; i < 15; ++i)
    q.samples.push_back({"q" + std::to_string(i), static_cast<std::int64_t>(i % 5), static_cast<std::int64_t>(i % 3)});
  for (std::size_t i = 0; i < 60; ++i)
    g.samples.push_back({"g" + std::to_string(i), static_cast<std::int64_t>(i % 5), static_cast<std::int64_t>(i % 4)});
  save_embeddings(path("q.tsv"), q);
  save_embeddings(path("g.tsv"), g);
  const Outcome r = run("eval --query " + path("q.tsv") + " --gallery " + path("g.tsv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, format_report(rank(q, g, Protocol::veri)));
}

TEST_F(Cli, EvalMalformedNamesLine) {
  write("q.tsv", "#reid-embeddings v1 dim=2\nq0\t1\t0\t0 0\nq1\t1\t0\t0\n");
  write("g.tsv", "#reid-embeddings v1 dim=2\ng0\t1\t1\t0 0\n");
  const Outcome r = run("eval --query " + path("q.tsv") + " --gallery " + path("g.tsv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

TEST_F(Cli, MineHandGeometry) {
  write("e.tsv", "#reid-embeddings v1 dim=2\na0\t1\t0\t0 0\na1\t1\t0\t0 1\nb0\t2\t0\t10 0\nb1\t2\t0\t10 2\n");
  const Outcome r = run("mine --embeddings " + path("e.tsv"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream rows(r.out);
  std::string first;
  std::getline(rows, first);
  EXPECT_EQ(first, "0\t1\t2\t1\t10");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
}

TEST_F(Cli, MinePkBatchOfThirtySix) {
  EmbeddingSet s;
  Rng rng(5);
  s.vectors = Matrix(60, 3);
  for (double& v : s.vectors.data()) v = rng.normal();
  for (std::size_t i = 0; i < 60; ++i)
    s.samples.push_back({"s" + std::to_string(i), static_cast<std::int64_t>(i % 10), 0});
  save_embeddings(path("e.tsv"), s);
  const Outcome r = run("mine --embeddings " + path("e.tsv") + " --p 6 --k 6 --seed 4");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 36);
  EXPECT_EQ(run("mine --embeddings " + path("e.tsv") + " --p 6 --k 6 --seed 4").out, r.out);
}

TEST_F(Cli, MineSingletonIdentityIsDataError) {
  write("e.tsv", "#reid-embeddings v1 dim=1\na0\t1\t0\t0\na1\t1\t0\t1\nb0\t42\t0\t5\n");
  const Outcome r = run("mine --embeddings " + path("e.tsv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("42"), std::string::npos) << r.err;
}

TEST_F(Cli, ScheduleRows) {
  const Outcome r = run("schedule --kind warmup1 --base-lr 1e-4 --epochs 41");
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::size_t, double> lr;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch\tlr");
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    lr[std::stoul(line.substr(0, tab))] = std::stod(line.substr(tab + 1));
  }
  ASSERT_EQ(lr.size(), 41u);
  EXPECT_NEAR(lr[0], 1e-5, 1e-15);
  EXPECT_NEAR(lr[5], 5.5e-5, 1e-15);
  EXPECT_NEAR(lr[10], 1e-4, 1e-15);
  EXPECT_NEAR(lr[20], 6e-5, 1e-15);
  EXPECT_NEAR(lr[40], 3.6e-5, 1e-15);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("schedule").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("schedule --kind cosine --epochs 3").code, 1);
  EXPECT_EQ(run("mine --embeddings x --p 3").code, 1);
  EXPECT_EQ(run("schedule --epochs 3", "GLAMOR_KIT_THREADS=zero").code, 1);
  EXPECT_EQ(run("schedule --epochs 3", "GLAMOR_KIT_THREADS=2").code, 0);
  EXPECT_EQ(run("eval --query " + path("missing") + " --gallery " + path("missing")).code, 2);
}

class CliModel : public Cli {
 protected:
  void SetUp() override {
    Cli::SetUp();
    config = ModelConfig::toy();
    write("model.cfg", format_model_config(config));
    params = init_params(config, 9);
    save_params(path("params.ckpt"), params);
  }
  ModelConfig config;
  ModelParams params;
};

TEST_F(CliModel, ForwardShapeAndCheckpointRoundTrip) {
  Tensor4 img({2, 3, 32, 32});
  Rng rng(1);
  for (double& v : img.data()) v = rng.normal();
  save_tensor(path("x.tensor"), img);
  const Outcome r = run("forward --config " + path("model.cfg") + " --params " + path("params.ckpt") + " --input " +
                    path("x.tensor") + " --dump-activations " + path("acts"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 15);
  }
  EXPECT_EQ(rows, 2u);
  EXPECT_TRUE(fs::exists(path("acts/input_conv.tensor")));
  EXPECT_EQ(load_tensor(path("acts/input_conv.tensor")).shape().c, 8u);

  // re-save the loaded checkpoint and run again: same bytes out
  save_params(path("again.ckpt"), load_params(config, path("params.ckpt")));
  EXPECT_EQ(slurp(path("again.ckpt")), slurp(path("params.ckpt")));
  const Outcome again = run("forward --config " + path("model.cfg") + " --params " + path("again.ckpt") + " --input " +
                        path("x.tensor"));
  EXPECT_EQ(again.out, r.out);
}

TEST_F(CliModel, ForwardRejectsWrongChannels) {
  save_tensor(path("x.tensor"), Tensor4({1, 1, 8, 8}));
  const Outcome r = run("forward --config " + path("model.cfg") + " --params " + path("params.ckpt") + " --input " +
                    path("x.tensor"));
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliModel, SparsityConstructedStems) {
  SyntheticConfig sc;
  sc.num_identities = 2;
  sc.images_per_identity = 3;
  sc.image_size = 8;
  save_dataset(make_synthetic_dataset(sc), path("data"));
  const std::string manifest = (dir_ / "data" / "manifest.tsv").string();
  auto probe = [&](double even_beta, double odd_beta) {
    ModelParams p = params;
    for (double& w : p.stem.weight.data()) w = 0.0;
    for (double& b : p.stem.bias) b = 0.0;
    for (std::size_t c = 0; c < p.stem_norm.beta.size(); ++c) p.stem_norm.beta[c] = c % 2 ? odd_beta : even_beta;
    save_params(path("p.ckpt"), p);
    const Outcome r = run("sparsity --config " + path("model.cfg") + " --params " + path("p.ckpt") + " --images " +
                      manifest + " --samples 4 --seed 1");
    EXPECT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    return line;
  };
  EXPECT_EQ(probe(0.0, 0.0), "input_conv\t1.000000");
  EXPECT_EQ(probe(1.0, 1.0), "input_conv\t0.000000");
  EXPECT_EQ(probe(1.0, 0.0), "input_conv\t0.500000");
}

TEST_F(CliModel, TrainZeroEpochsAndRerun) {
  SyntheticConfig sc;
  sc.num_identities = 3;
  sc.images_per_identity = 4;
  sc.image_size = 8;
  save_dataset(make_synthetic_dataset(sc), path("data"));
  const std::string manifest = (dir_ / "data" / "manifest.tsv").string();
  ModelConfig c = config;
  c.num_classes = 3;
  write("train.cfg", format_model_config(c) + "p=3\nk=2\n");

  Outcome r = run("train --config " + path("train.cfg") + " --manifest " + manifest + " --epochs 0 --seed 5 --out " +
              path("zero.ckpt"));
  ASSERT_EQ(r.code, 0) << r.err;
  save_params(path("init.ckpt"), init_params(c, 5));
  EXPECT_EQ(slurp(path("zero.ckpt")), slurp(path("init.ckpt")));

  r = run("train --config " + path("train.cfg") + " --manifest " + manifest + " --epochs 2 --seed 5 --out " +
          path("a.ckpt") + " --log " + path("a.log"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Outcome b = run("train --config " + path("train.cfg") + " --manifest " + manifest +
                    " --epochs 2 --seed 5 --out " + path("b.ckpt"));
  EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
  EXPECT_EQ(b.out, r.out);
  EXPECT_EQ(slurp(path("a.log")), r.out);
  EXPECT_EQ(r.out.rfind("epoch=0 lr=", 0), 0u);

  write("bad.cfg", "stages=1x8\nbogus_key=1\n");
  EXPECT_EQ(run("train --config " + path("bad.cfg") + " --manifest " + manifest + " --epochs 1 --out " +
                path("c.ckpt"))
                .code,
            1);
}

TEST_F(Cli, SynthWritesManifest) {
  const Outcome r = run("synth --out " + path("d") + " --identities 2 --per-identity 2 --size 4 --seed 3");
  ASSERT_EQ(r.code, 0) << r.err;
  const Dataset d = load_manifest_dataset(path("d/manifest.tsv"));
  EXPECT_EQ(d.size(), 4u);
}

}  // namespace
}  // namespace glamor

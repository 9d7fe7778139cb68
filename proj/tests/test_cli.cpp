// Copyright 2026 The hashlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the hashlab executable end to end on small synthetic CIFAR-format data.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hashlab/hashlab.hpp"
#include "synthetic.hpp"

namespace hashlab {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int status = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "hashlab_cli_tests";
    fs::remove_all(root_);
    testing_support::write_synthetic_cifar_dir(root_ / "cifar", 20, 3);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  CliRun run(const std::string& args) {
    const fs::path capture = root_ / "stdout.txt";
    const std::string cmd = std::string(HASHLAB_CLI_PATH) + " " + args + " > " + capture.string() + " 2> " +
                            (root_ / "stderr.txt").string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(capture)};
  }

  std::string small_train(const std::string& out, const std::string& extra = "") {
    return "train --data-dir " + (root_ / "cifar").string() + " --out " + (root_ / out).string() +
           " --queries 10 --database 60 --train-images 30 --epochs 2 --batch 16 --k 8 --quiet " + extra;
  }

  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, TrainRejectsZeroBits) {
  EXPECT_EQ(run(small_train("bad", "--k 0")).status, 1);
  EXPECT_EQ(run("train --k -4").status, 1);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("frobnicate").status, 1);
  EXPECT_EQ(run("train --method nope --data-dir x").status, 1);
  EXPECT_EQ(run("train --alpha 1 --alpha-over-beta 2").status, 1);
  EXPECT_EQ(run("--help").status, 0);
}

TEST_F(Cli, MissingDataIsADataError) {
  EXPECT_EQ(run("train --data-dir " + (root_ / "nowhere").string()).status, 2);
}

TEST_F(Cli, TrainWritesArtifactsAndIsReproducible) {
  const CliRun a = run(small_train("a"));
  ASSERT_EQ(a.status, 0) << slurp(root_ / "stderr.txt");
  EXPECT_NE(a.out.find("map="), std::string::npos);
  for (const char* f : {artifact::kModel, artifact::kQueryCodes, artifact::kDatabaseCodes, artifact::kShadowCodes,
                        artifact::kLossTrace, artifact::kQueryLabels, artifact::kDatabaseLabels, artifact::kQueryIds,
                        artifact::kDatabaseIds, artifact::kTrainIds, "config.txt"})
    EXPECT_TRUE(fs::exists(root_ / "a" / f)) << f;
  EXPECT_EQ(read_codes(root_ / "a" / artifact::kQueryCodes).size(), 10u);
  EXPECT_EQ(read_codes(root_ / "a" / artifact::kDatabaseCodes).size(), 60u);

  ASSERT_EQ(run(small_train("b")).status, 0);
  for (const char* f : {artifact::kLossTrace, artifact::kQueryCodes, artifact::kDatabaseCodes, artifact::kModel})
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;

  // rerunning from the dumped effective config reproduces the artifacts
  ASSERT_EQ(run("train --config " + (root_ / "a" / "config.txt").string() + " --out " + (root_ / "c").string() + " --quiet").status, 0);
  for (const char* f : {artifact::kLossTrace, artifact::kQueryCodes, artifact::kDatabaseCodes})
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "c" / f)) << f;
  EXPECT_EQ(slurp(root_ / "a" / "config.txt"), slurp(root_ / "c" / "config.txt"));
}

TEST_F(Cli, AlphaOverBetaIsStoredAsAbsoluteWeights) {
  ASSERT_EQ(run("train --alpha-over-beta 100 --beta 0.01 --dump-config " + (root_ / "dump.txt").string()).status, 0);
  const std::string dump = slurp(root_ / "dump.txt");
  EXPECT_NE(dump.find("alpha=1\n"), std::string::npos) << dump;
  EXPECT_NE(dump.find("beta=0.01\n"), std::string::npos) << dump;
  EXPECT_EQ(dump.find("over"), std::string::npos);
  // flags override the file
  ASSERT_EQ(run("train --config " + (root_ / "dump.txt").string() + " --k 16 --dump-config " + (root_ / "dump2.txt").string()).status, 0);
  EXPECT_NE(slurp(root_ / "dump2.txt").find("k=16\n"), std::string::npos);
  EXPECT_NE(slurp(root_ / "dump2.txt").find("alpha=1\n"), std::string::npos);
}

TEST_F(Cli, EncodeMatchesForwardSigns) {
  ASSERT_EQ(run(small_train("enc")).status, 0);
  const auto images = root_ / "cifar" / "test_batch.bin";
  const auto model = root_ / "enc" / artifact::kModel;
  ASSERT_EQ(run("encode --model " + model.string() + " --images " + images.string() + " --out " + (root_ / "e1.hlpc").string()).status, 0);
  ASSERT_EQ(run("encode --model " + model.string() + " --images " + images.string() + " --out " + (root_ / "e2.hlpc").string()).status, 0);
  EXPECT_EQ(slurp(root_ / "e1.hlpc"), slurp(root_ / "e2.hlpc"));
  const auto net = load_checkpoint(model);
  const auto set = read_cifar_file(images);
  EXPECT_EQ(unpack(read_codes(root_ / "e1.hlpc")), shadow_update(as_matrix(net.predict(set.images)).eval()));
  EXPECT_EQ(run("encode --model " + model.string() + " --images " + images.string() + " --k 12 --out " + (root_ / "e3.hlpc").string()).status, 1);
}

TEST_F(Cli, EncodeEmptySetWritesHeaderOnly) {
  ASSERT_EQ(run(small_train("empty_model")).status, 0);
  { std::ofstream(root_ / "empty.bin", std::ios::binary); }
  ASSERT_EQ(run("encode --model " + (root_ / "empty_model" / artifact::kModel).string() + " --images " +
                (root_ / "empty.bin").string() + " --out " + (root_ / "empty.hlpc").string()).status, 0);
  const auto codes = read_codes(root_ / "empty.hlpc");
  EXPECT_EQ(codes.size(), 0u);
  EXPECT_EQ(codes.bits(), 8);
}

class CliCodes : public Cli {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(5);
    db_ = PackedCodes(50, 12);
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 12; ++j) db_.set_bit(i, j, rng() & 1);
    write_codes(root_ / "db.hlpc", db_);
  }
  PackedCodes db_;
};

TEST_F(CliCodes, QueryAgreesWithLibraryRanking) {
  std::string bits;
  for (std::size_t j = 0; j < 12; ++j) bits += db_.bit(17, j) ? '1' : '0';
  const CliRun r = run("query --db-codes " + (root_ / "db.hlpc").string() + " --code " + bits + " --top 7");
  ASSERT_EQ(r.status, 0);
  std::ostringstream expected;
  for (const auto& h : rank_database(db_.code(17), db_, 7).hits) expected << h.id << '\t' << h.distance << '\n';
  EXPECT_EQ(r.out, expected.str());
  EXPECT_EQ(r.out.substr(0, 5), "17\t0\n");
  const CliRun by_index = run("query --db-codes " + (root_ / "db.hlpc").string() + " --query-codes " + (root_ / "db.hlpc").string() + " --index 17 --top 7");
  EXPECT_EQ(by_index.out, expected.str());
}

TEST_F(CliCodes, QueryTopZeroIsEmpty) {
  const CliRun r = run("query --db-codes " + (root_ / "db.hlpc").string() + " --code 000000000000 --top 0");
  EXPECT_EQ(r.status, 0);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliCodes, QueryRejectsMalformedCodesFile) {
  { std::ofstream(root_ / "junk.hlpc") << "JUNKJUNKJUNK"; }
  EXPECT_EQ(run("query --db-codes " + (root_ / "junk.hlpc").string() + " --code 000000000000").status, 2);
}

TEST_F(CliCodes, SelfRetrievalScoresOne) {
  // one distinct code per class, each class repeated
  PackedCodes codes(30, 12);
  std::vector<std::uint8_t> labels(30);
  for (std::size_t i = 0; i < 30; ++i) {
    labels[i] = static_cast<std::uint8_t>(i % 10);
    for (std::size_t j = 0; j < 4; ++j) codes.set_bit(i, j, (labels[i] >> j) & 1);
  }
  write_codes(root_ / "self.hlpc", codes);
  write_labels(root_ / "self_labels.txt", labels);
  const CliRun r = run("eval --query-codes " + (root_ / "self.hlpc").string() + " --db-codes " + (root_ / "self.hlpc").string() +
                    " --query-labels " + (root_ / "self_labels.txt").string() + " --db-labels " +
                    (root_ / "self_labels.txt").string() + " --precision-at 3 --radius 0");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("map=1.0000\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("precision_at_3=1.0000\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("radius_recall=1.0000\n"), std::string::npos) << r.out;
}

TEST_F(CliCodes, EvalReportsMissingLabels) {
  write_labels(root_ / "short.txt", std::vector<std::uint8_t>(45, 1));
  const CliRun r = run("eval --query-codes " + (root_ / "db.hlpc").string() + " --db-codes " + (root_ / "db.hlpc").string() +
                    " --query-labels " + (root_ / "short.txt").string() + " --db-labels " + (root_ / "short.txt").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(slurp(root_ / "stderr.txt").find("missing ids 45..49"), std::string::npos) << slurp(root_ / "stderr.txt");
}

TEST_F(CliCodes, RandomCodesEvaluateNearChance) {
  std::mt19937_64 rng(8);
  PackedCodes q(500, 12), db(5000, 12);
  for (auto* c : {&q, &db})
    for (std::size_t i = 0; i < c->size(); ++i)
      for (std::size_t j = 0; j < 12; ++j) c->set_bit(i, j, rng() & 1);
  std::vector<std::uint8_t> ql(500), dl(5000);
  for (std::size_t i = 0; i < ql.size(); ++i) ql[i] = static_cast<std::uint8_t>(i % 10);
  for (std::size_t i = 0; i < dl.size(); ++i) dl[i] = static_cast<std::uint8_t>(i % 10);
  write_codes(root_ / "rq.hlpc", q);
  write_codes(root_ / "rdb.hlpc", db);
  write_labels(root_ / "rql.txt", ql);
  write_labels(root_ / "rdl.txt", dl);
  const CliRun r = run("eval --query-codes " + (root_ / "rq.hlpc").string() + " --db-codes " + (root_ / "rdb.hlpc").string() +
                    " --query-labels " + (root_ / "rql.txt").string() + " --db-labels " + (root_ / "rdl.txt").string());
  ASSERT_EQ(r.status, 0);
  const auto pos = r.out.find("map=");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(r.out.substr(pos + 4)), 0.1, 0.02);
}

TEST_F(Cli, FactorizeCnnhWritesCodes) {
  write_labels(root_ / "cnnh_labels.txt", std::vector<std::uint8_t>{0, 0, 1, 1, 0});
  const CliRun r = run("factorize-cnnh --labels " + (root_ / "cnnh_labels.txt").string() + " --q 2 --sweeps 20 --out " +
                    (root_ / "cnnh.hlpc").string());
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("binarized_objective=0.0000"), std::string::npos) << r.out;
  EXPECT_EQ(read_codes(root_ / "cnnh.hlpc").size(), 5u);
  EXPECT_EQ(run("factorize-cnnh --labels " + (root_ / "cnnh_labels.txt").string() + " --q 0 --out x.hlpc").status, 1);
}

TEST_F(Cli, SolveAdshRuns) {
  const CliRun r = run("solve-adsh --data-dir " + (root_ / "cifar").string() + " --out " + (root_ / "adsh").string() +
                    " --queries 10 --database 40 --sampled-queries 10 --iterations 2 --network-epochs 1 --batch 10 --c 6 --quiet");
  ASSERT_EQ(r.status, 0) << slurp(root_ / "stderr.txt");
  EXPECT_EQ(read_codes(root_ / "adsh" / artifact::kDatabaseCodes).size(), 40u);
  EXPECT_EQ(read_codes(root_ / "adsh" / artifact::kQueryCodes).bits(), 6);
}

}  // namespace
}  // namespace hashlab

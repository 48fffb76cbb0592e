#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "advgame/io.hpp"
#include "support.hpp"

using namespace advgame;
using namespace testing_support;

namespace {

// Fresh scratch directory per test.
fs::path scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "advgame-tests" /
                       (std::string(info->test_suite_name()) + "." + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Axis pair on disk plus the single point (1,1).
ExperimentConfig symmetric_experiment(const fs::path& dir, Method method, int rounds) {
  save_model(binary({1, 0}, 0), dir / "w1.json");
  save_model(binary({0, 1}, 0), dir / "w2.json");
  write(dir / "points.csv", "f0,f1,label\n1,1,0\n");
  ExperimentConfig cfg;
  cfg.model_paths = {dir / "w1.json", dir / "w2.json"};
  cfg.dataset_path = dir / "points.csv";
  cfg.method = method;
  cfg.mwu.rounds = rounds;
  cfg.mwu.budget = AttackBudget(Norm::l2, 1.2);
  cfg.output_dir = dir / "results";
  return cfg;
}

}  // namespace

TEST(LoadModel, LinearBinary) {
  const fs::path dir = scratch();
  write(dir / "m.json",
        R"({"kind":"linear","num_classes":2,"dim":2,"weights":[[1,0],[-1,0]],"biases":[0,0]})");
  const Classifier c = load_model(dir / "m.json");
  EXPECT_EQ(c.num_classes(), 2);
  EXPECT_EQ(c.predict(vec({2, 0})), 0);
  EXPECT_EQ(c.predict(vec({-2, 0})), 1);
}

TEST(LoadModel, AllPairsConvertedToOneVsAll) {
  const fs::path dir = scratch();
  write(dir / "m.json",
        R"({"kind":"all_pairs","num_classes":2,"dim":2,"pairs":[{"i":0,"j":1,"weights":[1,0],"bias":0}]})");
  const Classifier c = load_model(dir / "m.json");
  ASSERT_TRUE(c.is_linear());
  EXPECT_EQ(c.predict(vec({2, 0})), 0);
  EXPECT_EQ(c.predict(vec({-2, 0})), 1);
}

TEST(LoadModel, MultivectorConverted) {
  const fs::path dir = scratch();
  write(dir / "m.json", R"({"kind":"multivector","num_classes":2,"dim":1,"weights":[1,0,-1,0]})");
  const Classifier c = load_model(dir / "m.json");
  EXPECT_EQ(c.predict(vec({3})), 0);
  EXPECT_EQ(c.predict(vec({-3})), 1);
}

TEST(LoadModel, NanWeightNamesTheField) {
  const fs::path dir = scratch();
  write(dir / "m.json",
        R"({"kind":"linear","num_classes":2,"dim":2,"weights":[[1,"NaN"],[0,0]],"biases":[0,0]})");
  try {
    load_model(dir / "m.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos) << e.what();
  }
}

TEST(LoadModel, InvalidJsonReportsLine) {
  const fs::path dir = scratch();
  write(dir / "m.json", "{\n  \"kind\": \"linear\",\n  oops\n}\n");
  try {
    load_model(dir / "m.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadModel, ShapeMismatch) {
  const fs::path dir = scratch();
  write(dir / "m.json", R"({"kind":"linear","num_classes":2,"dim":3,"weights":[[1,0],[0,1]],"biases":[0,0]})");
  EXPECT_THROW(load_model(dir / "m.json"), ParseError);
}

TEST(LoadModel, UnknownKind) {
  const fs::path dir = scratch();
  write(dir / "m.json", R"({"kind":"svm","num_classes":2,"dim":2})");
  EXPECT_THROW(load_model(dir / "m.json"), ParseError);
}

TEST(LoadModel, RoundTripPreservesPredictions) {
  const fs::path dir = scratch();
  std::mt19937_64 rng(71);
  const LinearClassifier lin(random_matrix(3, 4, rng), random_vector(3, rng));
  const MlpClassifier mlp = random_mlp(4, 5, 3, rng);
  save_model(lin, dir / "lin.json");
  save_model(mlp, dir / "mlp.json");
  save_model_set(ClassifierSet({lin, mlp}, {"a", "b"}), dir / "set.json");
  const Classifier lin2 = load_model(dir / "lin.json");
  const Classifier mlp2 = load_model(dir / "mlp.json");
  const ClassifierSet set2 = load_model_set({dir / "set.json"});
  EXPECT_EQ(set2.labels(), (std::vector<std::string>{"a", "b"}));
  for (int t = 0; t < 200; ++t) {
    const Vector x = random_vector(4, rng, 3.0);
    EXPECT_EQ(lin2.logits(x), Classifier(lin).logits(x));
    EXPECT_EQ(mlp2.logits(x), Classifier(mlp).logits(x));
    EXPECT_EQ(set2[1].predict(x), mlp.predict(x));
  }
}

TEST(LoadDataset, OnePoint) {
  const fs::path dir = scratch();
  const Dataset d = load_dataset(write(dir / "d.csv", "f0,f1,label\n0.2,0.8,1\n"));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].x, vec({0.2, 0.8}));
  EXPECT_EQ(d[0].label, 1);
}

TEST(LoadDataset, EmptyWarns) {
  const fs::path dir = scratch();
  std::ostringstream warn;
  const Dataset d = load_dataset(write(dir / "d.csv", "f0,f1,label\n"), &warn);
  EXPECT_TRUE(d.empty());
  EXPECT_FALSE(warn.str().empty());
}

TEST(LoadDataset, MalformedRowNamesRow) {
  const fs::path dir = scratch();
  try {
    load_dataset(write(dir / "d.csv", "f0,f1,label\n0.1,0.2,0\n0.3,abc,1\n"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, BadHeader) {
  const fs::path dir = scratch();
  EXPECT_THROW(load_dataset(write(dir / "d.csv", "x,y,label\n0,0,0\n")), ParseError);
}

TEST(LoadDataset, SaveRoundTrip) {
  const fs::path dir = scratch();
  const Dataset d = {{vec({0.1, 1.0 / 3.0}), 1}, {vec({-2.5, 1e-300}), 0}};
  save_dataset(d, 2, dir / "d.csv");
  const Dataset back = load_dataset(dir / "d.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(back[j].x, d[j].x);
    EXPECT_EQ(back[j].label, d[j].label);
  }
}

TEST(RunExperiment, LabelOutOfRangeRejectedUpFront) {
  const fs::path dir = scratch();
  save_model(LinearClassifier(Matrix::Identity(3, 2), Vector::Zero(3)), dir / "m.json");
  write(dir / "d.csv", "f0,f1,label\n1,0,7\n");
  ExperimentConfig cfg;
  cfg.model_paths = {dir / "m.json"};
  cfg.dataset_path = dir / "d.csv";
  cfg.output_dir = dir / "out";
  EXPECT_THROW(run_experiment(cfg), InputError);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(RunExperiment, MwuExactWithMlpIsConfigError) {
  const fs::path dir = scratch();
  std::mt19937_64 rng(72);
  save_model(random_mlp(2, 3, 2, rng), dir / "m.json");
  write(dir / "d.csv", "f0,f1,label\n0.5,0.5,0\n");
  ExperimentConfig cfg;
  cfg.model_paths = {dir / "m.json"};
  cfg.dataset_path = dir / "d.csv";
  cfg.output_dir = dir / "out";
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(RunExperiment, SymmetricInstanceMwuExact) {
  const fs::path dir = scratch();
  ExperimentConfig cfg = symmetric_experiment(dir, Method::mwu_exact, 278);
  cfg.mwu.beta = 0.05;
  const ExperimentResult r = run_experiment(cfg);
  EXPECT_GE(r.report.max_accuracy, 0.4);
  EXPECT_LE(r.report.max_accuracy, 0.6);
  EXPECT_TRUE(fs::exists(r.directory / "results.json"));
  EXPECT_TRUE(fs::exists(r.directory / "summary.csv"));
  const std::string conv = slurp(r.directory / "convergence.csv");
  EXPECT_EQ(std::count(conv.begin(), conv.end(), '\n'), 279);
}

TEST(RunExperiment, OracleLeavesOneClassifierCorrect) {
  const fs::path dir = scratch();
  const ExperimentResult r = run_experiment(symmetric_experiment(dir, Method::oracle, 1));
  EXPECT_DOUBLE_EQ(r.report.max_accuracy, 1.0);
  EXPECT_FALSE(fs::exists(r.directory / "convergence.csv"));
}

TEST(RunExperiment, ByteIdenticalReruns) {
  const fs::path dir = scratch();
  ExperimentConfig cfg = symmetric_experiment(dir, Method::mwu_exact, 40);
  const ExperimentResult a = run_experiment(cfg);
  const std::string first = slurp(a.directory / "results.json");
  const std::string first_summary = slurp(a.directory / "summary.csv");
  cfg.threads = 3;
  const ExperimentResult b = run_experiment(cfg);
  EXPECT_EQ(a.directory, b.directory);
  EXPECT_EQ(first, slurp(b.directory / "results.json"));
  EXPECT_EQ(first_summary, slurp(b.directory / "summary.csv"));
  cfg.mwu.seed = 9;
  EXPECT_NE(run_experiment(cfg).directory, a.directory);
}

TEST(RunExperiment, ReloadedAttacksRevalidate) {
  const fs::path dir = scratch();
  const ExperimentResult r = run_experiment(symmetric_experiment(dir, Method::mwu_exact, 10));
  const auto qs = load_attacks(r.directory / "results.json");
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(qs[0].size(), 10u);
  EXPECT_THROW(load_attacks(r.directory / "results.json", AttackBudget(Norm::l2, 0.5)), ParseError);
}

TEST(EmitReport, TwoRunsSortedByMax) {
  const fs::path dir = scratch();
  run_experiment(symmetric_experiment(dir, Method::oracle, 1));
  run_experiment(symmetric_experiment(dir, Method::mwu_exact, 50));
  std::ostringstream out;
  const auto rows = emit_report(dir / "results", out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].method, "mwu-exact");
  EXPECT_EQ(rows[1].method, "oracle");
  EXPECT_LE(rows[0].max_accuracy, rows[1].max_accuracy);
  EXPECT_LT(out.str().find("mwu-exact"), out.str().find("oracle"));
  const std::string csv = slurp(dir / "results" / "convergence_all.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 51);
}

TEST(EmitReport, EmptyDirectoryIsAnError) {
  const fs::path dir = scratch();
  std::ostringstream out;
  EXPECT_THROW(emit_report(dir, out), InputError);
  EXPECT_TRUE(out.str().empty());
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(EmitReport, CorruptRunWritesNothing) {
  const fs::path dir = scratch();
  run_experiment(symmetric_experiment(dir, Method::oracle, 1));
  fs::create_directories(dir / "results" / "broken");
  write(dir / "results" / "broken" / "summary.csv", "method,norm\n");
  std::ostringstream out;
  EXPECT_ANY_THROW(emit_report(dir / "results", out));
  EXPECT_TRUE(out.str().empty());
  EXPECT_FALSE(fs::exists(dir / "results" / "convergence_all.csv"));
}

TEST(Cli, AttackAndReport) {
  const char* cli = std::getenv("ADVGAME_CLI");
  if (cli == nullptr) GTEST_SKIP() << "ADVGAME_CLI not set";
  const fs::path dir = scratch();
  symmetric_experiment(dir, Method::mwu_exact, 1);
  const std::string base = std::string(cli) + " attack --model " + (dir / "w1.json").string() + " --model " +
                           (dir / "w2.json").string() + " --dataset " + (dir / "points.csv").string() +
                           " --out " + (dir / "results").string() + " --eps 1.2";
  ASSERT_EQ(std::system((base + " --method mwu-exact --rounds 100 > " + (dir / "a.txt").string()).c_str()), 0);
  ASSERT_EQ(std::system((base + " --method ensemble > " + (dir / "b.txt").string()).c_str()), 0);
  ASSERT_EQ(std::system((std::string(cli) + " report " + (dir / "results").string() + " > " +
                         (dir / "r.txt").string())
                            .c_str()),
            0);
  const std::string table = slurp(dir / "r.txt");
  EXPECT_LT(table.find("mwu-exact"), table.find("ensemble"));
  ASSERT_EQ(std::system((std::string(cli) + " margins --model " + (dir / "w1.json").string() + " --model " +
                         (dir / "w2.json").string() + " --dataset " + (dir / "points.csv").string() + " > " +
                         (dir / "m.txt").string())
                            .c_str()),
            0);
  EXPECT_NE(slurp(dir / "m.txt").find("1"), std::string::npos);
  // Bad flag values fail with a nonzero status.
  EXPECT_NE(std::system((base + " --method nope > /dev/null 2>&1").c_str()), 0);
  EXPECT_NE(std::system((base + " --eps -1 > /dev/null 2>&1").c_str()), 0);
}

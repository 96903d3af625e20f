#include <cmath>
#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>

#include "bmilearn/artifacts.hpp"
#include "bmilearn/linalg.hpp"
#include "bmilearn/pipeline.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bmilearn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("same seed gives identical weights and metrics") {
  const ExperimentConfig cfg = testing::tiny_config();
  const RunOutput a = run_experiment(cfg, 3);
  const RunOutput b = run_experiment(cfg, 3);
  CHECK(a.post.params.w_rec == b.post.params.w_rec);
  CHECK(a.pre.final_loss == b.pre.final_loss);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].ffcc == b.rows[i].ffcc);
  const RunOutput c = run_experiment(cfg, 4);
  CHECK_FALSE(c.post.params.w_rec == a.post.params.w_rec);
}

TEST_CASE("zero pretraining trials leave the weights untouched") {
  ExperimentConfig cfg = testing::tiny_config();
  cfg.pretrain_trials = 0;
  const PretrainResult pre = pretrain(cfg, 5);
  CHECK(pre.metrics.empty());
  // With nothing learned the frozen evaluations see the same network.
  CHECK(pre.final_loss > 0.5 * pre.initial_loss);
  double s2 = 0;
  for (double v : pre.params.w_rec.values()) s2 += v * v;
  CHECK(std::sqrt(s2 / 400.0) == doctest::Approx(1.5 / std::sqrt(20.0)).epsilon(0.15));
  ExperimentConfig trained = cfg;
  trained.pretrain_trials = 10;
  CHECK_FALSE(pretrain(trained, 5).params.w_rec == pre.params.w_rec);
}

TEST_CASE("retraining respects the configured similarities") {
  ExperimentConfig cfg = testing::tiny_config();
  cfg.alignment = 0.7;
  cfg.decoder_similarity = 0.4;
  const RunOutput out = run_experiment(cfg, 2);
  CHECK(std::abs(cosine_similarity_flat(out.post.obs.m, out.post.obs.w_bmi.transposed()) - 0.7) <= 0.02);
  CHECK(std::abs(cosine_similarity_flat(out.post.obs.w_bmi, out.pre.params.w_bmi) - 0.4) <= 0.02);
  CHECK(std::abs(cosine_similarity_flat(out.pre.m0, out.pre.params.w_bmi.transposed()) - 0.5) <= 0.02);
}

TEST_CASE("zero feedback gain leaves the feedback weights at zero") {
  const RunOutput out = run_experiment(testing::tiny_config(), 1);
  CHECK(max_abs(out.post.params.w_fb) == 0.0);
  ExperimentConfig fb = testing::tiny_config();
  fb.feedback_gain = 2.0;
  const RunOutput with = run_experiment(fb, 1);
  CHECK(testing::rel_err(with.post.params.w_fb, with.post.obs.m * 2.0) < 1e-15);
}

TEST_CASE("phases and blocks have the configured sizes") {
  const ExperimentConfig cfg = testing::tiny_config();
  const RunOutput out = run_experiment(cfg, 0);
  const Observables& obs = out.post.obs;
  CHECK(obs.early.size() == cfg.block_size);
  CHECK(obs.late.size() == cfg.block_size);
  CHECK(obs.mid_train.size() + obs.mid_test.size() == 40);
  // Whole target cycles alternate, so each half sees every target.
  std::set<std::size_t> train_targets, test_targets;
  for (const auto& t : obs.mid_train) train_targets.insert(t.target_id);
  for (const auto& t : obs.mid_test) test_targets.insert(t.target_id);
  CHECK(train_targets.size() == 4);
  CHECK(test_targets.size() == 4);
  std::size_t early = 0, train = 0, late = 0;
  for (const auto& m : out.post.metrics) {
    early += m.phase == "early";
    train += m.phase == "train";
    late += m.phase == "late";
  }
  CHECK(early == cfg.block_size);
  CHECK(train == 120);
  CHECK(late == cfg.block_size);
}

TEST_CASE("analysis rows name every hypothesis") {
  ExperimentConfig cfg = testing::tiny_config(TrainRule::rl);
  cfg.noise_rank = 5;
  const RunOutput out = run_experiment(cfg, 0);
  std::set<std::string> names;
  for (const auto& r : out.rows) names.insert(r.hypothesis);
  CHECK(names == std::set<std::string>{"sl_true_m", "sl_random_m", "rl", "rl_isotropic"});
  for (const auto& r : out.rows) {
    CHECK(r.ffcc >= -1.0);
    CHECK(r.ffcc <= 1.0);
    CHECK(r.rule_trained == "rl");
  }
}

TEST_CASE("mirroring adds windowed rows and raises alignment") {
  ExperimentConfig cfg = testing::tiny_config();
  cfg.eta_wm = 0.01;
  cfg.train_trials = 200;
  const RunOutput out = run_experiment(cfg, 0);
  CHECK(out.post.obs.windows.size() == 5);
  int windowed = 0;
  for (const auto& r : out.rows) windowed += r.window >= 0;
  CHECK(windowed == 10);
  CHECK(out.post.m_alignment.back() > out.post.m_alignment.front());
}

TEST_CASE("trials to criterion") {
  std::vector<MetricRow> rows;
  for (std::size_t i = 0; i < 200; ++i) rows.push_back({"train", i, i % 4, i < 100 ? 2.0 : 1.0});
  const auto ttc = trials_to_criterion(rows, 1.0, 2.0);
  REQUIRE(ttc);
  // The 50-trial mean first reaches 1.25 once 38 of its trials are low.
  CHECK(*ttc == 138);
  std::vector<MetricRow> flat(100, MetricRow{"train", 0, 0, 2.0});
  CHECK_FALSE(trials_to_criterion(flat, 1.0, 2.0));
}

TEST_CASE("weight hash") {
  Matrix a{{1, 2}, {3, 4}};
  const auto h = weight_hash(a);
  CHECK(weight_hash(a) == h);
  a(1, 1) = std::nextafter(4.0, 5.0);
  CHECK(weight_hash(a) != h);
}

TEST_CASE("divergence is reported") {
  ExperimentConfig cfg = testing::tiny_config();
  cfg.activation = Activation::linear;
  cfg.g = 3.0;
  cfg.eta_rec = 50.0;
  cfg.pretrain_trials = 200;
  CHECK_THROWS_AS(pretrain(cfg, 0), DivergenceError);
}

TEST_CASE("doubles survive text round trips") {
  RandomSource rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.gaussian() * std::pow(10.0, rng.uniform(-300, 300));
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(parse_double(format_double(0.1)) == 0.1);
  CHECK_THROWS_AS(parse_double("1.5x"), ArtifactError);
}

TEST_CASE("run artifacts round-trip and analysis never needs recurrent weights") {
  testing::TempDir dir("artifact");
  ExperimentConfig cfg = testing::tiny_config();
  cfg.eta_wm = 0.01;
  cfg.train_trials = 200;
  const RunOutput out = run_experiment(cfg, 9);
  write_run_artifact(dir.path, cfg, 9, out);

  for (const char* f : {"config.json", "metrics.csv", "analysis.csv", "log.txt", "weights/pretrained.csv",
                        "weights/retrained.csv", "weights/retrained.csv.json", "trials/early.csv", "trials/mid.csv",
                        "trials/late.csv"})
    CHECK_MESSAGE(fs::exists(dir.path / f), f);

  CHECK(read_matrix(dir.path / "weights" / "retrained.csv") == out.post.params.w_rec);
  const auto metrics = read_metrics(dir.path / "metrics.csv");
  CHECK(metrics.size() == out.pre.metrics.size() + out.post.metrics.size());
  CHECK(metrics.back().loss == out.post.metrics.back().loss);

  // Remove everything an experimenter could not record, then analyse.
  fs::remove_all(dir.path / "weights");
  const Observables obs = load_observables(dir.path);
  CHECK(obs.mid_train.size() == out.post.obs.mid_train.size());
  CHECK(obs.early[3].h == out.post.obs.early[3].h);
  const auto rows = analyze(obs);
  const auto stored = read_analysis(dir.path / "analysis.csv");
  REQUIRE(rows.size() == stored.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].hypothesis == stored[i].hypothesis);
    CHECK(rows[i].window == stored[i].window);
    CHECK(rows[i].ffcc == stored[i].ffcc);
  }
}

TEST_CASE("config.json replays to identical metrics") {
  testing::TempDir a("replay_a"), b("replay_b");
  const ExperimentConfig cfg = testing::tiny_config(TrainRule::rl);
  write_run_artifact(a.path, cfg, 21, run_experiment(cfg, 21));
  const ExperimentConfig again = load_config((a.path / "config.json").string());
  CHECK(again.seed == 21);
  write_run_artifact(b.path, again, again.seed, run_experiment(again, again.seed));
  CHECK(slurp(a.path / "metrics.csv") == slurp(b.path / "metrics.csv"));
  CHECK(slurp(a.path / "analysis.csv") == slurp(b.path / "analysis.csv"));
}

TEST_CASE("every CSV has a header and matrices have sidecars") {
  testing::TempDir dir("headers");
  const ExperimentConfig cfg = testing::tiny_config();
  write_run_artifact(dir.path, cfg, 0, run_experiment(cfg, 0));
  for (const auto& e : fs::recursive_directory_iterator(dir.path)) {
    if (e.path().extension() != ".csv") continue;
    const std::string parent = e.path().parent_path().filename().string();
    if (parent == "weights" || parent == "observables") {
      CHECK(fs::exists(e.path().string() + ".json"));
    } else {
      std::ifstream in(e.path());
      std::string first;
      std::getline(in, first);
      CHECK_MESSAGE(std::isalpha(static_cast<unsigned char>(first[0])), e.path().string());
    }
  }
}

TEST_CASE("malformed artifacts raise") {
  testing::TempDir dir("broken");
  CHECK_THROWS_AS(load_observables(dir.path), ArtifactError);
  write_matrix(dir.path / "m.csv", Matrix{{1, 2}, {3, 4}});
  {
    std::ofstream out(dir.path / "m.csv");
    out << "1,2\n3\n";
  }
  CHECK_THROWS_AS(read_matrix(dir.path / "m.csv"), ArtifactError);
}

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <fstream>

#include "bmilearn/artifacts.hpp"
#include "bmilearn/sweep.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bmilearn;
namespace fs = std::filesystem;

TEST_CASE("every plan has a grid") {
  for (const auto& name : plan_names()) {
    CAPTURE(name);
    const auto plan = plan_from_string(name);
    REQUIRE(plan);
    const auto cells = plan_cells(*plan);
    CHECK_FALSE(cells.empty());
    for (const auto& c : cells) CHECK_FALSE(c.label.empty());
  }
  CHECK_FALSE(plan_from_string("nope"));
}

TEST_CASE("plan grids follow their figures") {
  const auto fb = plan_cells(Plan::feedback_gain);
  std::set<double> gains;
  for (const auto& c : fb) gains.insert(c.cfg.feedback_gain);
  CHECK(gains.count(0.5));
  CHECK(gains.count(5.0));
  const auto nr = plan_cells(Plan::noise_rank);
  CHECK(nr.size() == 8);
  for (const auto& c : nr) CHECK(c.cfg.seeds.size() == 3);
  const auto al = plan_cells(Plan::alignment);
  CHECK(al.front().cfg.alignment == 0.3);
  CHECK(al.back().cfg.alignment == 1.0);
}

TEST_CASE("a template replaces the plan preset") {
  const ExperimentConfig tpl = testing::tiny_config();
  for (const auto& c : plan_cells(Plan::decoder_similarity, tpl)) CHECK(c.cfg.n == 20);
}

TEST_CASE("sweeps are deterministic regardless of thread count") {
  const ExperimentConfig tpl = testing::tiny_config();
  auto cells = plan_cells(Plan::bptt, tpl);
  SweepOptions one, three;
  three.jobs = 3;
  const auto a = run_sweep(Plan::bptt, cells, one);
  const auto b = run_sweep(Plan::bptt, cells, three);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].cell == b[i].cell);
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].ffcc == b[i].ffcc);
  }
}

TEST_CASE("failed cells are recorded and the sweep continues") {
  ExperimentConfig tpl = testing::tiny_config();
  auto cells = plan_cells(Plan::decoder_similarity, tpl);
  // Make one cell diverge.
  cells[1].cfg.activation = Activation::linear;
  cells[1].cfg.g = 3.0;
  cells[1].cfg.eta_rec = 50.0;
  cells[1].cfg.pretrain_trials = 200;
  const auto rows = run_sweep(Plan::decoder_similarity, cells, {});
  std::map<std::pair<std::string, std::uint64_t>, int> per_run;
  std::size_t diverged = 0;
  for (const auto& r : rows) {
    ++per_run[{r.cell, r.seed}];
    diverged += r.status == "diverged";
  }
  std::size_t expected_runs = 0;
  for (const auto& c : cells) expected_runs += c.cfg.seeds.size();
  CHECK(per_run.size() == expected_runs);
  CHECK(diverged == cells[1].cfg.seeds.size());
  for (const auto& r : rows)
    if (r.cell == cells[1].label) CHECK(r.hypothesis.empty());
}

TEST_CASE("summary compares against the rule-consistent hypothesis") {
  std::vector<SweepRow> rows;
  const double sl_vals[] = {0.4, 0.42, 0.38, 0.41};
  const double rl_vals[] = {0.1, 0.12, 0.09, 0.11};
  for (std::uint64_t s = 0; s < 4; ++s) {
    for (auto [h, v] : {std::pair{"sl_true_m", sl_vals[s]}, {"rl", rl_vals[s]}}) {
      SweepRow r;
      r.plan = "alignment";
      r.cell = "sl_rflo/alignment=0.5";
      r.rule_trained = "sl_rflo";
      r.seed = s;
      r.hypothesis = h;
      r.ffcc = v;
      r.learned = true;
      rows.push_back(r);
    }
  }
  rows[6].learned = false;
  const auto sum = summarize(rows);
  REQUIRE(sum.size() == 2);
  CHECK(sum[0].hypothesis == "sl_true_m");
  CHECK_FALSE(sum[0].test);
  CHECK(sum[0].n == 3);
  CHECK(sum[0].n_runs == 4);
  REQUIRE(sum[1].test);
  CHECK(sum[1].test->t > 0);
  CHECK(sum[1].test->p < 0.001);
  CHECK(reference_hypothesis("rl") == "rl");
  CHECK(reference_hypothesis("sl_bptt") == "sl_true_m");
}

TEST_CASE("sweep CSV round-trips and the report is long-format") {
  testing::TempDir dir("sweep");
  const ExperimentConfig tpl = testing::tiny_config();
  const auto cells = plan_cells(Plan::velocity, tpl);
  SweepOptions opt;
  opt.seeds = std::vector<std::uint64_t>{0, 1};
  const auto rows = run_sweep(Plan::velocity, cells, opt);
  write_sweep_csv(dir.path / "velocity.csv", rows);
  write_summary_csv(dir.path / "velocity_summary.csv", summarize(rows));
  const auto back = read_sweep_csv(dir.path / "velocity.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].ffcc == rows[i].ffcc);
    CHECK(back[i].hypothesis == rows[i].hypothesis);
    CHECK(back[i].early_loss == rows[i].early_loss);
  }
  const auto files = write_report(dir.path);
  CHECK(files.size() == 2);
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string header, line;
    std::getline(in, header);
    const auto commas = std::count(header.begin(), header.end(), ',');
    std::size_t n = 0;
    while (std::getline(in, line)) {
      // Fixed column count is what makes the table long-format.
      CHECK(std::count(line.begin(), line.end(), ',') == commas);
      ++n;
    }
    CHECK(n > 0);
  }
}

TEST_CASE("feedforward plan rows") {
  auto cells = plan_cells(Plan::feedforward);
  cells.resize(1);
  cells[0].ff->n_trials = 100;
  SweepOptions opt;
  opt.ff_replicates = 3;
  const auto rows = run_sweep(Plan::feedforward, cells, opt);
  CHECK(rows.size() == 6);
  CHECK(rows[0].rule_trained == "sl");
}

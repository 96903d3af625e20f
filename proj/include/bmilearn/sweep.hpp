#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bmilearn/config.hpp"
#include "bmilearn/feedforward.hpp"
#include "bmilearn/stats.hpp"

namespace bmilearn {

enum class Plan {
  alignment,
  noise_scale,
  network_size,
  feedback_gain,
  noise_rank,
  decoder_similarity,
  subset_readout,
  bptt,
  linear,
  velocity,
  feedforward,
  mirror
};

std::string to_string(Plan p);
std::optional<Plan> plan_from_string(const std::string& s);
std::vector<std::string> plan_names();

/// One grid point. `ff` is set only for the feedforward plan.
struct SweepCell {
  std::string label;
  std::string param;
  double value = 0.0;
  ExperimentConfig cfg;
  std::optional<ff::FfExperiment> ff;
  ff::FfRule ff_rule = ff::FfRule::sl;
};

/// Grid for `plan`. When `base` is given it replaces the plan's own preset
/// and the plan only overrides its swept parameter and the rule.
std::vector<SweepCell> plan_cells(Plan plan, const std::optional<ExperimentConfig>& base = std::nullopt);

/// One line of the consolidated sweep CSV. A failed seed yields one row with
/// an empty hypothesis and status "diverged" or "failed".
struct SweepRow {
  std::string plan, cell, param;
  double value = 0.0;
  std::string rule_trained;
  std::uint64_t seed = 0;
  std::string hypothesis;
  int window = -1;
  double alignment = 0.0;
  double ffcc = 0.0;
  std::size_t skipped_terms = 0;
  bool learned = false;
  std::string status = "ok";
  std::string error;
  double pre_initial = 0.0, pre_final = 0.0, early_loss = 0.0, late_loss = 0.0;
  long trials_to_criterion = -1;
  double final_m_alignment = 0.0;
};

/// Per (cell, window, hypothesis) over learned runs. The t-test compares the
/// rule-consistent hypothesis against `vs`; it is left empty on that
/// hypothesis' own row.
struct SummaryRow {
  std::string plan, cell, param;
  double value = 0.0;
  std::string rule_trained;
  int window = -1;
  std::string hypothesis;
  std::size_t n = 0;
  std::size_t n_runs = 0;
  double mean = 0.0, sem = 0.0;
  std::string reference;
  std::optional<TTestResult> test;
};

std::string reference_hypothesis(const std::string& rule_trained);

struct SweepOptions {
  std::size_t jobs = 1;
  std::optional<std::vector<std::uint64_t>> seeds;  ///< overrides every cell's seed list
  std::optional<std::size_t> ff_replicates;         ///< feedforward only, default 100
};

/// Runs every (cell, seed) pair on up to `jobs` threads. Output order follows
/// the grid, then the seed list, whatever the thread timing.
std::vector<SweepRow> run_sweep(Plan plan, const std::vector<SweepCell>& cells, const SweepOptions& opt);
std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

/// Long-format tables (one measurement per line) for every sweep CSV in `dir`.
/// Returns the files written.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir);

}  // namespace bmilearn

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmilearn/config.hpp"
#include "bmilearn/matrix.hpp"
#include "bmilearn/pipeline.hpp"

namespace bmilearn {

/// Unreadable or inconsistent run directory.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string code_version();

/// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

/// Row-major CSV without a header plus `<path>.json` holding rows, cols and
/// any extra metadata.
void write_matrix(const std::filesystem::path& path, const Matrix& m, const std::string& meta_json = "{}");
Matrix read_matrix(const std::filesystem::path& path);

/// One row per timestep: block, trial, target, t, h_*, y_*, eps_*, cursor_*.
void write_trials(const std::filesystem::path& path, std::span<const std::vector<ObservedTrial>* const> blocks,
                  std::span<const std::string> labels);
/// Trials grouped by block label, in file order.
std::vector<std::pair<std::string, std::vector<ObservedTrial>>> read_trials(const std::filesystem::path& path);

void write_metrics(const std::filesystem::path& path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metrics(const std::filesystem::path& path);

void write_analysis(const std::filesystem::path& path, std::span<const AnalysisRow> rows);
std::vector<AnalysisRow> read_analysis(const std::filesystem::path& path);

/// config.json: the resolved configuration with `seed` set to the run seed
/// and a code_version entry.
void write_run_config(const std::filesystem::path& dir, const ExperimentConfig& cfg, std::uint64_t seed);

void write_pretrain_artifact(const std::filesystem::path& dir, const ExperimentConfig& cfg, std::uint64_t seed,
                             const PretrainResult& pre);
void write_run_artifact(const std::filesystem::path& dir, const ExperimentConfig& cfg, std::uint64_t seed,
                        const RunOutput& run);

/// Reads only what analyze() may see; the recurrent weights are never opened.
Observables load_observables(const std::filesystem::path& dir);

}  // namespace bmilearn

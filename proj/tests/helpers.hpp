#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "bmilearn/config.hpp"
#include "bmilearn/matrix.hpp"
#include "bmilearn/random.hpp"

namespace testing {

inline double rel_err(const bmilearn::Matrix& a, const bmilearn::Matrix& b) {
  return bmilearn::frobenius_norm(a - b) / std::max(bmilearn::frobenius_norm(b), 1e-300);
}

// Small enough to run end to end in well under a second.
inline bmilearn::ExperimentConfig tiny_config(bmilearn::TrainRule rule = bmilearn::TrainRule::sl_rflo) {
  bmilearn::ExperimentConfig c;
  c.rule = rule;
  c.n = 20;
  c.pretrain_trials = 60;
  c.train_trials = 120;
  c.block_size = 24;
  c.seeds = {0, 1};
  return c;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("bmilearn_" + tag + "_" + std::to_string(bmilearn::RandomSource(std::hash<std::string>{}(tag)).next_u64()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace testing

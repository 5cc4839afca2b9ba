#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "restyle/backend.hpp"
#include "restyle/metrics.hpp"
#include "restyle/noising.hpp"
#include "restyle/pipeline.hpp"

namespace restyle {

/// HARD and SOFT train and decode with that mask kind; NO_CONTROL uses the
/// configured mask with a constant control label at training and
/// inference; TEACHER is the HARD system at teacher_k; STUDENT_K* are
/// rewrite students distilled from the teacher, decoded with K samples
/// (K=1 greedy).
enum class Condition { Hard, Soft, NoControl, Teacher, StudentK1, StudentK2, StudentK4 };

std::string to_string(Condition c);
Condition parse_condition(const std::string& name);

struct ExperimentConfig {
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  /// Empty: the sorted label names found in the training corpus.
  std::vector<std::string> labels;
  std::filesystem::path output_dir = "experiment-out";

  MaskSpec mask;
  BackendKind backend = BackendKind::Count;
  NeuralHyper neural;
  NeuralHyper student;
  std::size_t variants_per_example = 4;
  ControlSource control_source = ControlSource::Classifier;

  std::vector<std::size_t> k_list = {1, 8, 32};
  std::size_t teacher_k = 32;
  double temperature = 1.0;
  std::size_t max_len = 64;
  SelectionPolicy policy;
  bool keep_copy_fallbacks = false;

  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<Condition> conditions = {Condition::Hard};
  GMode g_mode = GMode::Corpus;
  SemanticMode semantic_mode = SemanticMode::VsReference;
  double nb_alpha = 1.0;
  double lm_k = 0.1;
  /// Parallel cells; 0 uses the OpenMP default.
  int workers = 0;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  /// Keys mirror the fields; absent keys keep their defaults, unknown keys
  /// are rejected. Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

/// Overlays the keys of `overrides` on `doc` (objects merge recursively).
nlohmann::json merge_config(nlohmann::json doc, const nlohmann::json& overrides);

struct ExperimentRow {
  Condition condition = Condition::Hard;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double semantic = 0.0;
  double g = 0.0;
  double s_bleu = 0.0;
  double fluency = 0.0;
};

struct ExperimentResult {
  /// Sorted by (condition, K, seed).
  std::vector<ExperimentRow> rows;
  /// Training pairs per (condition, seed) for the denoising conditions.
  std::vector<std::pair<std::string, std::size_t>> pair_counts;
};

/// Trains every component, transfers the test set for every (condition, K,
/// seed) and evaluates it. Cells run in parallel; the result does not
/// depend on the worker count. Failures name the stage that failed.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string results_csv(const ExperimentResult& result);
/// Per-(condition, K) means over seeds.
std::string summary_csv(const ExperimentResult& result);

/// Writes results.csv and summary.csv into config.output_dir.
void write_experiment(const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace restyle

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "restyle/metrics.hpp"
#include "restyle/pipeline.hpp"
#include "restyle/text.hpp"

namespace restyle {

/// Parses a JSON Lines file, skipping blank lines. Errors name the file
/// and line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

/// Sorted distinct label names found under "label" in a corpus file.
std::vector<std::string> corpus_label_names(const std::filesystem::path& path);

/// Corpus lines {"text": ..., "label": ... (optional)}. Labels must belong
/// to `labels`.
std::vector<LabeledExample> read_corpus(const std::filesystem::path& path, const LabelSet& labels);
nlohmann::json corpus_line(const LabeledExample& ex);

/// One test item: {"source", "reference" (optional), "target_label",
/// "source_label" (optional)}.
struct TestItem {
  TokenSeq source;
  std::optional<TokenSeq> reference;
  std::size_t target_label = 0;
  std::optional<std::size_t> source_label;
};

std::vector<TestItem> read_test_set(const std::filesystem::path& path, const LabelSet& labels);
nlohmann::json test_line(const TestItem& item, const LabelSet& labels);

/// Batch transfer output line: the test item plus "output", "chosen_index",
/// "target_prob" and "similarity" of the chosen candidate.
nlohmann::json transfer_line(const TestItem& item, const TransferResult& result, const LabelSet& labels);

/// Records for evaluation from lines carrying "source", "output",
/// "target_label" and optionally "reference".
std::vector<EvalRecord> read_eval_records(const std::filesystem::path& path, const LabelSet& labels);

/// Teacher output lines {"source", "control", "output", "target_prob",
/// "similarity", "passed", "copy_fallback"}; "control" is the control
/// token spelling.
nlohmann::json teacher_line(const TeacherRecord& record, const LabelSet& labels);
std::vector<TeacherRecord> read_teacher_records(const std::filesystem::path& path, const LabelSet& labels);

/// Report document and per-record CSV (source, output, reference, target,
/// acc_hit, semantic, bleu, ppl).
nlohmann::json report_json(const EvalReport& report, SemanticMode semantic_mode);
std::string report_csv(const EvalReport& report, const std::vector<EvalRecord>& records, const LabelSet& labels);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& value);

}  // namespace restyle

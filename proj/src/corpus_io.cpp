#include "restyle/corpus_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "restyle/error.hpp"
#include "restyle/persistence.hpp"

namespace restyle {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& at) {
  if (!obj.contains(key)) throw DataError(at + ": missing \"" + key + "\"");
  return obj[key];
}

std::string string_field(const nlohmann::json& obj, const char* key, const std::string& at) {
  const auto& v = field(obj, key, at);
  if (!v.is_string()) throw DataError(at + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

std::size_t label_field(const nlohmann::json& obj, const char* key, const LabelSet& labels, const std::string& at) {
  const auto name = string_field(obj, key, at);
  const auto idx = labels.find(name);
  if (!idx) throw DataError(at + ": unknown label '" + name + "'");
  return *idx;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw DataError(where(path, n) + ": not a JSON object");
    out.push_back(std::move(doc));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines) {
  std::string text;
  for (const auto& l : lines) text += l.dump() + "\n";
  write_text_file(path, text);
}

std::vector<std::string> corpus_label_names(const std::filesystem::path& path) {
  std::set<std::string> names;
  const auto lines = read_jsonl(path);
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (lines[i].contains("label")) names.insert(string_field(lines[i], "label", where(path, i + 1)));
  return {names.begin(), names.end()};
}

std::vector<LabeledExample> read_corpus(const std::filesystem::path& path, const LabelSet& labels) {
  const auto lines = read_jsonl(path);
  std::vector<LabeledExample> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto at = where(path, i + 1);
    std::optional<AttributeLabel> label;
    if (lines[i].contains("label") && !lines[i]["label"].is_null())
      label = labels.label(label_field(lines[i], "label", labels, at));
    out.push_back(LabeledExample::from_text(string_field(lines[i], "text", at), label));
  }
  if (out.empty()) throw DataError("empty corpus");
  return out;
}

nlohmann::json corpus_line(const LabeledExample& ex) {
  nlohmann::json j = {{"text", ex.text}};
  if (ex.label) j["label"] = ex.label->name;
  return j;
}

std::vector<TestItem> read_test_set(const std::filesystem::path& path, const LabelSet& labels) {
  const auto lines = read_jsonl(path);
  std::vector<TestItem> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto at = where(path, i + 1);
    TestItem item;
    item.source = tokenize(string_field(lines[i], "source", at));
    if (lines[i].contains("reference") && !lines[i]["reference"].is_null())
      item.reference = tokenize(string_field(lines[i], "reference", at));
    item.target_label = label_field(lines[i], "target_label", labels, at);
    if (lines[i].contains("source_label") && !lines[i]["source_label"].is_null())
      item.source_label = label_field(lines[i], "source_label", labels, at);
    out.push_back(std::move(item));
  }
  if (out.empty()) throw DataError(path.string() + ": empty test set");
  return out;
}

nlohmann::json test_line(const TestItem& item, const LabelSet& labels) {
  nlohmann::json j = {{"source", detokenize(item.source)}};
  if (item.reference) j["reference"] = detokenize(*item.reference);
  j["target_label"] = labels.name(item.target_label);
  if (item.source_label) j["source_label"] = labels.name(*item.source_label);
  return j;
}

nlohmann::json transfer_line(const TestItem& item, const TransferResult& result, const LabelSet& labels) {
  auto j = test_line(item, labels);
  j["output"] = detokenize(result.output);
  if (result.chosen_index) {
    const auto& c = result.candidates[*result.chosen_index];
    j["chosen_index"] = *result.chosen_index;
    j["target_prob"] = c.target_prob;
    j["similarity"] = c.similarity;
  } else {
    j["chosen_index"] = nullptr;
  }
  return j;
}

std::vector<EvalRecord> read_eval_records(const std::filesystem::path& path, const LabelSet& labels) {
  const auto lines = read_jsonl(path);
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto at = where(path, i + 1);
    EvalRecord r;
    r.source = tokenize(string_field(lines[i], "source", at));
    r.output = tokenize(string_field(lines[i], "output", at));
    if (lines[i].contains("reference") && !lines[i]["reference"].is_null())
      r.reference = tokenize(string_field(lines[i], "reference", at));
    r.target_label = label_field(lines[i], "target_label", labels, at);
    out.push_back(std::move(r));
  }
  if (out.empty()) throw DataError(path.string() + ": no records to evaluate");
  return out;
}

nlohmann::json teacher_line(const TeacherRecord& record, const LabelSet& labels) {
  return {{"source", detokenize(record.source)},
          {"control", control_token(labels, record.control)},
          {"output", detokenize(record.output)},
          {"target_prob", record.target_prob},
          {"similarity", record.similarity},
          {"passed", record.passed},
          {"copy_fallback", record.copy_fallback}};
}

std::vector<TeacherRecord> read_teacher_records(const std::filesystem::path& path, const LabelSet& labels) {
  const auto lines = read_jsonl(path);
  std::vector<TeacherRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto at = where(path, i + 1);
    const auto& l = lines[i];
    TeacherRecord r;
    r.source = tokenize(string_field(l, "source", at));
    const auto control = string_field(l, "control", at);
    bool found = false;
    for (std::size_t c = 0; c < labels.size() && !found; ++c)
      if (control_token(labels, c) == control) {
        r.control = c;
        found = true;
      }
    if (!found) throw DataError(at + ": unknown control token '" + control + "'");
    r.output = tokenize(string_field(l, "output", at));
    r.target_prob = l.value("target_prob", 0.0);
    r.similarity = l.value("similarity", 0.0);
    r.passed = l.value("passed", false);
    r.copy_fallback = l.value("copy_fallback", false);
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json report_json(const EvalReport& report, SemanticMode semantic_mode) {
  return {{"records", report.rows.size()},
          {"accuracy", report.accuracy},
          {"semantic", report.semantic},
          {"g", report.g},
          {"s_bleu", report.s_bleu},
          {"fluency", report.fluency},
          {"g_mode", to_string(report.g_mode)},
          {"semantic_mode", to_string(semantic_mode)}};
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string report_csv(const EvalReport& report, const std::vector<EvalRecord>& records, const LabelSet& labels) {
  std::ostringstream out;
  out << "source,output,reference,target,acc_hit,semantic,bleu,ppl\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& row = report.rows.at(i);
    out << csv_field(detokenize(r.source)) << ',' << csv_field(detokenize(r.output)) << ','
        << csv_field(r.reference ? detokenize(*r.reference) : std::string()) << ','
        << csv_field(labels.name(r.target_label)) << ',' << (row.acc_hit ? 1 : 0) << ',' << fixed(row.semantic)
        << ',' << fixed(row.bleu) << ',' << fixed(row.perplexity) << '\n';
  }
  return out.str();
}

}  // namespace restyle

#include "restyle/persistence.hpp"

#include <fstream>
#include <sstream>

#include "restyle/error.hpp"

namespace restyle {

std::string format_tag(ModelFormat format) {
  switch (format) {
    case ModelFormat::Classifier: return "restyle.classifier/1";
    case ModelFormat::Embedder: return "restyle.embedder/1";
    case ModelFormat::LanguageModel: return "restyle.lm/1";
    case ModelFormat::CountBackend: return "restyle.count-backend/1";
    case ModelFormat::NeuralBackend: return "restyle.neural-backend/1";
  }
  return "restyle.unknown";
}

void check_format(const nlohmann::json& doc, ModelFormat expected) {
  const std::string want = format_tag(expected);
  if (!doc.is_object() || !doc.contains("format") || !doc["format"].is_string())
    throw DataError("missing format tag; expected format " + want);
  const auto got = doc["format"].get<std::string>();
  if (got != want) throw DataError("unsupported format '" + got + "'; expected format " + want);
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": not a JSON document (" + e.what() + ")");
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(1) + "\n");
}

}  // namespace restyle

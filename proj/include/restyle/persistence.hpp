#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace restyle {

enum class ModelFormat { Classifier, Embedder, LanguageModel, CountBackend, NeuralBackend };

/// Versioned tag stored under "format" in every model document,
/// e.g. "restyle.classifier/1".
std::string format_tag(ModelFormat format);

/// Throws DataError naming the expected tag when `doc` carries another one.
void check_format(const nlohmann::json& doc, ModelFormat expected);

/// Parses a whole file; DataError when unreadable or not JSON.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it into place, so readers
/// never observe a partial document.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace restyle

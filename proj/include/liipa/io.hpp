#pragma once

// Dataset record (JSON Lines) serialization, file helpers and content digests.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "liipa/core.hpp"

namespace liipa {

using ojson = nlohmann::ordered_json;

/// Hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Write to a sibling temp file then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

ojson to_json(const LabelSet& labels);
LabelSet label_set_from_json(const nlohmann::json& j);

/// One dataset record: {"id","text","genre","title","length_sentences",
/// "characters":[{"name","role","labels":{...}}],"seed"} plus an optional
/// "persona" object on demographized copies.
ojson to_json(const Narrative& n);
Narrative narrative_from_json(const nlohmann::json& j);

std::string to_jsonl(const std::vector<Narrative>& dataset);
std::vector<Narrative> read_dataset(const std::filesystem::path& path);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace liipa

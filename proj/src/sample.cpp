#include "cup/sample.hpp"

#include <set>
#include <sstream>

#include "json.hpp"

#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/metrics.hpp"

namespace cup {

namespace {

std::string required_field(const nlohmann::json& j, const char* field, std::size_t line) {
  const std::string where = j.contains("id") && j["id"].is_string()
                                ? "sample " + j["id"].get<std::string>()
                                : "record on line " + std::to_string(line);
  if (!j.contains(field) || j[field].is_null()) throw ValidationError(where + ": missing field '" + field + "'");
  if (!j[field].is_string()) throw ValidationError(where + ": field '" + field + "' must be a string");
  std::string value = j[field].get<std::string>();
  if (value.empty()) throw ValidationError(where + ": field '" + field + "' is empty");
  return value;
}

}  // namespace

std::vector<CommentUpdateSample> parse_dataset(const std::string& text) {
  std::vector<CommentUpdateSample> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
    CommentUpdateSample s;
    s.id = required_field(j, "id", line_no);
    s.old_code = required_field(j, "old_code", line_no);
    s.old_comment = required_field(j, "old_comment", line_no);
    s.new_code = required_field(j, "new_code", line_no);
    if (j.contains("new_comment") && !j["new_comment"].is_null()) {
      s.new_comment = required_field(j, "new_comment", line_no);
      if (accuracy(s.old_comment, *s.new_comment) == 1) {
        throw ValidationError("sample " + s.id + ": new_comment does not differ from old_comment");
      }
    }
    if (!seen.insert(s.id).second) throw ValidationError("duplicate sample id " + s.id);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CommentUpdateSample> load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("dataset not found: " + path.string());
  return parse_dataset(read_file(path));
}

std::string serialize_sample(const CommentUpdateSample& sample) {
  nlohmann::ordered_json j;
  j["id"] = sample.id;
  j["old_code"] = sample.old_code;
  j["old_comment"] = sample.old_comment;
  j["new_code"] = sample.new_code;
  if (sample.new_comment) j["new_comment"] = *sample.new_comment;
  return j.dump();
}

void save_dataset(const std::filesystem::path& path, const std::vector<CommentUpdateSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += serialize_sample(s) + "\n";
  write_file(path, out);
}

}  // namespace cup

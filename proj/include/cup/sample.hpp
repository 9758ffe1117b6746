#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cup {

struct CommentUpdateSample {
  std::string id;
  std::string old_code;
  std::string old_comment;
  std::string new_code;
  std::optional<std::string> new_comment;  // ground truth, when known

  bool operator==(const CommentUpdateSample&) const = default;
};

// Line-delimited JSON, one sample per line, fields in the order
// id, old_code, old_comment, new_code, new_comment. Blank lines are skipped.
// Throws ParseError (with line number) or ValidationError (with sample id).
std::vector<CommentUpdateSample> load_dataset(const std::filesystem::path& path);
std::vector<CommentUpdateSample> parse_dataset(const std::string& text);

std::string serialize_sample(const CommentUpdateSample& sample);
void save_dataset(const std::filesystem::path& path, const std::vector<CommentUpdateSample>& samples);

}  // namespace cup

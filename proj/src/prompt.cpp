#include "cup/prompt.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "json.hpp"

#include "cup/error.hpp"
#include "prompt_resources.hpp"

namespace cup {

namespace {

using Bindings = std::map<std::string, std::string, std::less<>>;

// Single pass, so placeholder-like text inside substituted values is never
// expanded. Unknown {names} are kept literally.
std::string render(std::string_view tmpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto it = bindings.find(tmpl.substr(i + 1, close - i - 1));
        if (it != bindings.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto nl = s.find('\n', start);
    const auto end = nl == std::string_view::npos ? s.size() : nl;
    std::string line(s.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool is_language_tag(std::string_view word) {
  static const std::array<std::string_view, 20> kTags = {
      "java", "javadoc", "python", "py", "c", "cpp", "c++", "js", "javascript", "ts",
      "typescript", "go", "rust", "kotlin", "text", "plaintext", "markdown", "md", "json", "comment"};
  const std::string w = lower(word);
  return std::find(kTags.begin(), kTags.end(), w) != kTags.end();
}

// Removes an opening/closing fence from a single line that carries content,
// e.g. "```java /** x */```".
std::string strip_inline_fence(std::string line) {
  std::string t = trim(line);
  if (!starts_with(t, "```")) return line;
  t = t.substr(3);
  if (t.size() >= 3 && t.compare(t.size() - 3, 3, "```") == 0) t = t.substr(0, t.size() - 3);
  const auto space = t.find_first_of(" \t");
  if (space != std::string::npos && is_language_tag(t.substr(0, space))) t = t.substr(space + 1);
  return t;
}

std::string strip_delimiters(const std::string& line) {
  std::string t = trim(line);
  for (std::string_view open : {"/**", "/*", "//"}) {
    if (starts_with(t, open)) {
      t = trim(t.substr(open.size()));
      break;
    }
  }
  if (t.size() >= 2 && t.compare(t.size() - 2, 2, "*/") == 0) t = trim(t.substr(0, t.size() - 2));
  while (starts_with(t, "*")) t = trim(t.substr(1));
  return t;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool in_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

bool strip_label(std::string& text, const std::vector<std::string>& labels) {
  const std::string l = lower(text);
  for (const auto& label : labels) {
    const std::string ll = lower(label);
    if (!ll.empty() && starts_with(l, ll)) {
      text = trim(text.substr(label.size()));
      return true;
    }
  }
  return false;
}

bool strip_quotes(std::string& text) {
  static const std::array<std::pair<std::string_view, std::string_view>, 4> kPairs = {{
      {"\"", "\""}, {"'", "'"}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"`", "`"}}};
  for (const auto& [open, close] : kPairs) {
    if (text.size() >= open.size() + close.size() && starts_with(text, open) &&
        text.compare(text.size() - close.size(), close.size(), close) == 0) {
      text = trim(text.substr(open.size(), text.size() - open.size() - close.size()));
      return true;
    }
  }
  return false;
}

void remove_all(std::string& text, std::string_view needle) {
  std::size_t pos;
  while ((pos = text.find(needle)) != std::string::npos) text.erase(pos, needle.size());
}

// Markdown bold markers, but not the "**" of a "/**" doc-comment opener.
void remove_bold(std::string& text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 2, "**") == 0 && !(i > 0 && text[i - 1] == '/')) {
      ++i;
      continue;
    }
    out += text[i];
  }
  text = std::move(out);
}

}  // namespace

void PromptStrategy::validate() const {
  if (shots < 0) throw ConfigError("strategy shots must be non-negative");
  if (!(temperature >= 0.0 && temperature <= 1.0)) throw ConfigError("strategy temperature must be in [0, 1]");
}

std::string build_update_prompt(const CommentUpdateSample& sample,
                                const std::vector<CommentUpdateSample>& demonstrations,
                                const PromptStrategy& strategy) {
  if (static_cast<int>(demonstrations.size()) != strategy.shots) {
    throw ContractError("strategy expects " + std::to_string(strategy.shots) + " demonstrations, got " +
                        std::to_string(demonstrations.size()));
  }
  std::string prompt(resources::prompt_template("system"));
  if (!demonstrations.empty()) {
    prompt += '\n';
    prompt += resources::prompt_template("demonstrations_header");
    const auto demo = resources::prompt_template("demonstration");
    int index = 1;
    for (auto it = demonstrations.rbegin(); it != demonstrations.rend(); ++it, ++index) {
      if (!it->new_comment) throw ContractError("demonstration " + it->id + " has no updated comment");
      prompt += render(demo, {{"index", std::to_string(index)},
                              {"old_method", it->old_code},
                              {"new_method", it->new_code},
                              {"old_comment", it->old_comment},
                              {"new_comment", *it->new_comment}});
    }
  }
  prompt += '\n';
  prompt += render(resources::prompt_template("query"), {{"old_method", sample.old_code},
                                                         {"new_method", sample.new_code},
                                                         {"old_comment", sample.old_comment}});
  return prompt;
}

std::string build_self_rank_prompt(const CommentUpdateSample& sample,
                                   const std::vector<CandidateComment>& candidates) {
  if (candidates.size() < 2) throw ContractError("self-ranking needs at least two candidates");
  std::string listing = "{";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) listing += ",\n ";
    listing += "\"Expert " + std::to_string(i + 1) + "\": {\"comment\": " +
               nlohmann::json(candidates[i].text).dump() + "}";
  }
  listing += "}";
  return render(resources::prompt_template("self_rank"), {{"old_method", sample.old_code},
                                                          {"new_method", sample.new_code},
                                                          {"old_comment", sample.old_comment},
                                                          {"candidates", listing},
                                                          {"k", std::to_string(candidates.size())}});
}

std::vector<std::string> default_response_labels() {
  return {"here is the updated comment:", "sure, here is the updated comment:", "the updated comment is:",
          "updated comment:", "new comment:", "comment:", "answer:", "output:"};
}

namespace {

std::string clean_once(std::string_view raw, const std::vector<std::string>& labels,
                       bool strip_comment_delimiters) {
  std::vector<std::string> kept;
  for (auto& line : split_lines(raw)) {
    const std::string t = trim(line);
    if (starts_with(t, "```")) {
      const std::string inner = trim(strip_inline_fence(t));
      // A bare fence (optionally with a language tag) carries no content.
      if (inner.empty() || (inner.find(' ') == std::string::npos && t.find("```", 3) == std::string::npos))
        continue;
      line = inner;
    }
    kept.push_back(strip_comment_delimiters ? strip_delimiters(line) : line);
  }
  std::string text;
  for (const auto& line : kept) {
    text += line;
    text += '\n';
  }
  remove_bold(text);
  remove_all(text, "`");
  text = trim(collapse_whitespace(text));
  while (strip_label(text, labels) || strip_quotes(text)) {
  }
  return text;
}

}  // namespace

std::string clean_response(std::string_view raw, const std::vector<std::string>& labels,
                           bool strip_comment_delimiters) {
  // Iterate to a fixed point so cleaning is idempotent even when one rule
  // exposes input for another (a label in front of a comment delimiter).
  std::string text = clean_once(raw, labels, strip_comment_delimiters);
  for (int i = 0; i < 8; ++i) {
    std::string next = clean_once(text, labels, strip_comment_delimiters);
    if (next == text) break;
    text = std::move(next);
  }
  return text;
}

std::string normalize_llm_response(std::string_view raw, const std::vector<std::string>& labels) {
  std::string text = clean_response(raw, labels, false);
  if (text.empty()) throw ValidationError("empty LLM response after normalization");
  return text;
}

}  // namespace cup

#include "fixtures.hpp"

#include <array>
#include <set>

#include "json.hpp"

#include "cup/digest.hpp"
#include "cup/rng.hpp"

namespace cup::fixtures {

namespace {

const std::array<const char*, 20> kObjects = {"buffer", "queue",  "cache",  "window", "socket", "parser", "thread",
                                             "record", "packet", "stream", "table",  "index",  "file",   "token",
                                             "frame",  "layer",  "user",   "order",  "account", "session"};
const std::array<const char*, 16> kFields = {"Size",   "Count", "Limit", "Offset", "Length",   "Width",
                                            "Height", "Timeout", "Delay", "Weight", "Score", "Level",
                                            "Depth",  "Capacity", "Priority", "Version"};
const std::array<const char*, 12> kOwners = {"widget", "manager", "service", "handler", "client", "server",
                                            "model",  "view",    "builder", "reader",  "writer", "pool"};
const std::array<const char*, 24> kFiller = {"current", "given",  "internal", "cached", "default", "maximum",
                                            "minimum", "total",  "shared",   "local",  "remote",  "active",
                                            "pending", "stored", "initial",  "final",  "valid",   "known",
                                            "public",  "simple", "raw",      "global", "inner",   "outer"};

template <typename A>
const char* pick(const A& arr, SplitMix64& rng) {
  return arr[rng.below(arr.size())];
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

struct Rename {
  int kind;
  std::string obj, old_field, new_field, owner;
};

std::string code_for(const Rename& r, const std::string& field) {
  const std::string name = capitalize(r.obj) + field;
  const std::string member = r.obj + field;
  switch (r.kind) {
    case 0: return "public int get" + name + "() {\n    return this." + member + ";\n}";
    case 1: return "public void set" + name + "(int value) {\n    this." + member + " = value;\n}";
    default: return "public boolean has" + name + "() {\n    return this." + member + " > 0;\n}";
  }
}

std::string comment_for(const Rename& r, const std::string& field) {
  const std::string member = r.obj + field;
  switch (r.kind) {
    case 0: return "Returns the " + member + " of this " + r.owner + ".";
    case 1: return "Sets the " + member + " of this " + r.owner + " to the given value.";
    default: return "Checks whether the " + member + " of this " + r.owner + " is positive.";
  }
}

std::string insert_word(const std::string& sentence, const std::string& word, SplitMix64& rng) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < sentence.size()) {
    const auto sp = sentence.find(' ', start);
    words.push_back(sentence.substr(start, sp == std::string::npos ? std::string::npos : sp - start));
    if (sp == std::string::npos) break;
    start = sp + 1;
  }
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(1 + rng.below(words.size() - 1)), word);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) out += (i ? " " : "") + words[i];
  return out;
}

// Recovers the generating fields from a rename sample (fields are the only
// capitalized camel part after the object word in the old/new comment).
std::pair<std::string, std::string> fields_of(const CommentUpdateSample& s) {
  for (const char* a : kFields) {
    if (s.old_comment.find(a) == std::string::npos) continue;
    for (const char* b : kFields)
      if (s.new_comment && s.new_comment->find(b) != std::string::npos && std::string(a) != b) return {a, b};
  }
  return {"", ""};
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

}  // namespace

ProviderConfig desk_provider() {
  ProviderConfig p;
  p.name = "stub";
  p.dimension = 28;
  p.seed = 7;
  return p;
}

RankerConfig desk_ranker() {
  RankerConfig c;
  c.embed_dim = 32;
  c.d_model = 32;
  c.attention_heads = 4;
  c.ffn_dim = 64;
  c.proj_dim = 16;
  c.learning_rate = 1e-3;
  c.batch_groups = 8;
  c.max_seq_len = 128;
  c.seed = 42;
  c.checkpoint_every = 200;
  c.epochs = 12;
  c.dropout = 0.1;
  return c;
}

std::vector<CommentUpdateSample> rename_samples(std::size_t n, std::uint64_t seed, const std::string& id_prefix) {
  SplitMix64 rng(seed);
  std::vector<CommentUpdateSample> out;
  std::set<std::string> seen_code;
  while (out.size() < n) {
    Rename r;
    r.kind = static_cast<int>(rng.below(3));
    r.obj = pick(kObjects, rng);
    r.old_field = pick(kFields, rng);
    do r.new_field = pick(kFields, rng);
    while (r.new_field == r.old_field);
    r.owner = pick(kOwners, rng);
    CommentUpdateSample s;
    s.old_code = code_for(r, r.old_field);
    if (!seen_code.insert(s.old_code).second) continue;
    char id[32];
    std::snprintf(id, sizeof(id), "%04zu", out.size());
    s.id = id_prefix + id;
    s.new_code = code_for(r, r.new_field);
    s.old_comment = comment_for(r, r.old_field);
    s.new_comment = comment_for(r, r.new_field);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AugmentedGroup> separable_groups(std::size_t n, std::size_t negatives, std::uint64_t seed,
                                             const std::string& id_prefix) {
  SplitMix64 rng(seed ^ 0xfeedull);
  std::vector<AugmentedGroup> out;
  for (const auto& s : rename_samples(n, seed, id_prefix)) {
    AugmentedGroup g;
    g.id = s.id;
    g.old_code = s.old_code;
    g.old_comment = s.old_comment;
    g.new_code = s.new_code;
    g.positive.text = insert_word(s.old_comment, kMarker, rng);
    g.positive.label = Label::kPositive;
    std::set<std::string> used;
    while (g.negatives.size() < negatives) {
      const std::string word = pick(kFiller, rng);
      std::string text = insert_word(s.old_comment, word, rng);
      if (!used.insert(word).second) continue;
      CandidateComment c;
      c.text = std::move(text);
      c.provenance = {kMockModel, static_cast<int>(g.negatives.size()), 0.2};
      c.label = Label::kNegative;
      g.negatives.push_back(std::move(c));
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::string> distractors(const CommentUpdateSample& s, std::uint64_t seed) {
  const auto [old_field, new_field] = fields_of(s);
  SplitMix64 rng(seed ^ fnv1a64(s.id.data(), s.id.size()));
  std::string wrong;
  do wrong = pick(kFields, rng);
  while (wrong == old_field || wrong == new_field);
  std::string over = *s.new_comment;
  over.pop_back();  // trailing period
  over += " and resets it.";
  return {s.old_comment, replace_all(*s.new_comment, new_field, wrong), over};
}

std::string mock_rules_json(const std::vector<CommentUpdateSample>& samples, std::uint64_t seed) {
  using nlohmann::ordered_json;
  ordered_json rules = ordered_json::array();
  rules.push_back({{"model", "*"},
                   {"contains", {"You are a Comment Judge"}},
                   {"response", R"({"top-1": "Expert 2", "top-2": "Expert 1", "top-3": "Expert 3", "top-4": "Expert 4"})"}});
  // Matched in this order: the first demonstration header present decides
  // the shot count, the bare key catches the zero-shot prompt.
  const std::array<const char*, 4> kShotMarkers = {"### Example 5", "### Example 3", "### Example 1", ""};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::string key = "### Task\nThe old method is as follows:\n" + s.old_code + "\n";
    const auto wrong = distractors(s, seed);
    const std::size_t truth_slot = (i + seed) % 4;
    std::size_t w = 0;
    for (std::size_t slot = 0; slot < 4; ++slot) {
      ordered_json contains = ordered_json::array({key});
      if (*kShotMarkers[slot]) contains.push_back(kShotMarkers[slot]);
      // Real models wrap answers in markdown now and then.
      const std::string reply =
          slot == truth_slot ? "```\n" + *s.new_comment + "\n```" : "Updated comment: " + wrong[w++];
      rules.push_back({{"model", "*"}, {"contains", contains}, {"response", reply}});
    }
  }
  return ordered_json{{"models", {kMockModel}}, {"rules", rules}}.dump(1);
}

std::string echo_truth_rules_json(const std::vector<CommentUpdateSample>& samples) {
  using nlohmann::ordered_json;
  ordered_json rules = ordered_json::array();
  for (const auto& s : samples) {
    const std::string key = "### Task\nThe old method is as follows:\n" + s.old_code + "\n";
    rules.push_back({{"model", "*"}, {"contains", {key}}, {"response", *s.new_comment}});
  }
  return ordered_json{{"models", {kMockModel}}, {"rules", rules}}.dump(1);
}

EndToEndFiles write_end_to_end(const std::filesystem::path& dir, std::size_t train, std::size_t val,
                               std::size_t test, std::uint64_t seed) {
  const auto all = rename_samples(train + val + test, seed, "s");
  const std::vector<CommentUpdateSample> tr(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(train));
  const std::vector<CommentUpdateSample> va(all.begin() + static_cast<std::ptrdiff_t>(train),
                                            all.begin() + static_cast<std::ptrdiff_t>(train + val));
  const std::vector<CommentUpdateSample> te(all.begin() + static_cast<std::ptrdiff_t>(train + val), all.end());
  EndToEndFiles f;
  f.dir = dir;
  f.train = dir / "train.jsonl";
  f.val = dir / "val.jsonl";
  f.test = dir / "test.jsonl";
  f.mock = dir / "mock_fixture.json";
  f.config = dir / "config.json";
  save_dataset(f.train, tr);
  save_dataset(f.val, va);
  save_dataset(f.test, te);
  write_file(f.mock, mock_rules_json(all, seed) + "\n");

  const auto p = desk_provider();
  const auto r = desk_ranker();
  nlohmann::ordered_json cfg;
  cfg["seed"] = seed;
  cfg["provider"] = {{"name", p.name}, {"dimension", p.dimension}, {"seed", p.seed}};
  cfg["strategies"] = {{"shots", {0, 1, 3, 5}}, {"temperature", 0.2}, {"models", {kMockModel}}};
  cfg["backend"] = {{"kind", "mock"}, {"fixture", "mock_fixture.json"}};
  cfg["ranker"] = nlohmann::ordered_json::parse(ranker_config_to_json(r));
  cfg["ranker"].erase("embed_dim");
  cfg["ranker"].erase("seed");
  cfg["ranker"]["method"] = "cuprank";
  cfg["paths"] = {{"corpus", "train.jsonl"}};
  write_file(f.config, cfg.dump(2) + "\n");
  return f;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cup-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cup::fixtures

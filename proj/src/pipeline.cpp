#include "cup/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

#include "cup/baselines.hpp"
#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/log.hpp"
#include "cup/rng.hpp"

namespace cup {

using nlohmann::ordered_json;

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& into) {
  if (j.contains(key) && !j[key].is_null()) into = j[key].get<T>();
}

const std::string& require_path(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError("missing path: " + std::string(what));
  return value;
}

std::vector<CommentUpdateSample> load_corpus(const PipelineConfig& c, const std::vector<CommentUpdateSample>& dataset) {
  if (c.paths.corpus.empty() || c.paths.corpus == c.paths.dataset) return dataset;
  return load_dataset(c.paths.corpus);
}

ExampleIndex open_index(const PipelineConfig& c, std::vector<CommentUpdateSample> corpus,
                        const EmbeddingProvider& provider) {
  if (!c.paths.index.empty() && std::filesystem::exists(c.paths.index))
    return ExampleIndex::load(c.paths.index, std::move(corpus), provider);
  auto index = ExampleIndex::build(std::move(corpus), provider);
  if (!c.paths.index.empty()) index.save(c.paths.index);
  return index;
}

std::unique_ptr<ResponseCache> open_cache(const PipelineConfig& c) {
  if (c.paths.cache_dir.empty()) return nullptr;
  return std::make_unique<ResponseCache>(std::filesystem::path(c.paths.cache_dir) / "responses.jsonl");
}

Manifest base_manifest(const std::string& subcommand, const PipelineConfig& c, const EmbeddingProvider* provider) {
  Manifest m;
  m.subcommand = subcommand;
  m.config_digest = config_digest(c);
  m.prompt_version = std::string(kPromptVersion);
  m.provider_identity = provider ? provider->identity() : std::string();
  m.seed = c.seed;
  return m;
}

void add_input(Manifest& m, const std::string& role, const std::string& path) {
  if (!path.empty()) m.inputs.emplace_back(role, sha256_file(path));
}

void add_corpus_inputs(Manifest& m, const PipelineConfig& c) {
  add_input(m, "dataset", c.paths.dataset);
  if (!c.paths.corpus.empty() && c.paths.corpus != c.paths.dataset) add_input(m, "corpus", c.paths.corpus);
}

void add_backend_inputs(Manifest& m, const PipelineConfig& c) {
  if (c.backend.kind == "mock") add_input(m, "mock_fixture", c.backend.fixture);
}

std::string finish(const Manifest& m, const std::filesystem::path& out) {
  write_file(manifest_path(out), m.to_json() + "\n");
  return m.digest();
}

ordered_json candidate_json(const RankedCandidate& r) {
  ordered_json j;
  j["text"] = r.candidate.text;
  j["score"] = r.score;
  j["model_id"] = r.candidate.provenance.model_id;
  j["shots"] = r.candidate.provenance.shots;
  j["temperature"] = r.candidate.provenance.temperature;
  return j;
}

}  // namespace

// --- config --------------------------------------------------------------------

void PipelineConfig::validate() const {
  if (provider.dimension <= 0) throw ConfigError("provider.dimension must be positive");
  if (shots.empty()) throw ConfigError("strategies.shots must not be empty");
  for (int k : shots)
    if (k < 0) throw ConfigError("strategies.shots must be non-negative");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("strategies.temperature must be in [0, 2]");
  if (backend.kind != "mock" && backend.kind != "http") throw ConfigError("backend.kind must be 'mock' or 'http'");
  static const std::vector<std::string> kMethods{"cuprank", "ranknet", "random", "self"};
  if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end())
    throw ConfigError("ranker.method must be one of cuprank, ranknet, random, self");
  ranker.validate();
  ranknet.validate();
  if (ranker.embed_dim != provider.dimension + kEditFeatureWidth)
    throw ConfigError("ranker.embed_dim must equal provider.dimension + 4");
  if (ranknet.embed_dim != provider.dimension) throw ConfigError("ranknet.embed_dim must equal provider.dimension");
  if (retrieve_k <= 0) throw ConfigError("retrieve_k must be positive");
}

PipelineConfig parse_pipeline_config(const std::string& text) {
  PipelineConfig c;
  nlohmann::json j;
  try {
    j = text.find_first_not_of(" \t\r\n") == std::string::npos ? nlohmann::json::object() : nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    read_opt(j, "seed", c.seed);
    read_opt(j, "retrieve_k", c.retrieve_k);
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      read_opt(p, "name", c.provider.name);
      read_opt(p, "dimension", c.provider.dimension);
      read_opt(p, "seed", c.provider.seed);
      read_opt(p, "model_path", c.provider.model_path);
    }
    if (j.contains("strategies")) {
      const auto& s = j["strategies"];
      read_opt(s, "shots", c.shots);
      read_opt(s, "temperature", c.temperature);
      read_opt(s, "models", c.models);
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      read_opt(b, "kind", c.backend.kind);
      read_opt(b, "fixture", c.backend.fixture);
      read_opt(b, "endpoint", c.backend.http.endpoint);
      read_opt(b, "api_key_env", c.backend.http.api_key_env);
      read_opt(b, "max_retries", c.backend.http.max_retries);
      read_opt(b, "backoff_ms", c.backend.http.backoff_ms);
      read_opt(b, "timeout_seconds", c.backend.http.timeout_seconds);
      read_opt(b, "concurrency", c.backend.http.concurrency);
      read_opt(b, "max_tokens", c.backend.max_tokens);
      if (b.contains("request_seed") && !b["request_seed"].is_null())
        c.backend.request_seed = b["request_seed"].get<std::int64_t>();
    }
    bool ranker_dim_given = false;
    if (j.contains("ranker")) {
      const auto& r = j["ranker"];
      read_opt(r, "method", c.method);
      c.ranker = ranker_config_from_json(r.dump());
      ranker_dim_given = r.contains("embed_dim");
    }
    if (!ranker_dim_given) c.ranker.embed_dim = c.provider.dimension + kEditFeatureWidth;
    bool ranknet_dim_given = false;
    if (j.contains("ranknet")) {
      c.ranknet = ranknet_config_from_json(j["ranknet"].dump());
      ranknet_dim_given = j["ranknet"].contains("embed_dim");
    }
    if (!ranknet_dim_given) c.ranknet.embed_dim = c.provider.dimension;
    c.ranker.seed = c.seed;
    c.ranknet.seed = c.seed;
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      read_opt(p, "dataset", c.paths.dataset);
      read_opt(p, "corpus", c.paths.corpus);
      read_opt(p, "groups", c.paths.groups);
      read_opt(p, "val", c.paths.val);
      read_opt(p, "checkpoint", c.paths.checkpoint);
      read_opt(p, "pred", c.paths.pred);
      read_opt(p, "gold", c.paths.gold);
      read_opt(p, "index", c.paths.index);
      read_opt(p, "out", c.paths.out);
      read_opt(p, "cache_dir", c.paths.cache_dir);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.backend.http.models = c.models;
  c.validate();
  return c;
}

std::string pipeline_config_to_json(const PipelineConfig& c, bool include_paths) {
  ordered_json j;
  j["seed"] = c.seed;
  j["provider"] = {{"name", c.provider.name}, {"dimension", c.provider.dimension}, {"seed", c.provider.seed}};
  if (include_paths) j["provider"]["model_path"] = c.provider.model_path;
  j["strategies"] = {{"shots", c.shots}, {"temperature", c.temperature}, {"models", c.models}};
  ordered_json b;
  b["kind"] = c.backend.kind;
  if (include_paths) b["fixture"] = c.backend.fixture;
  b["endpoint"] = c.backend.http.endpoint;
  b["api_key_env"] = c.backend.http.api_key_env;
  b["max_retries"] = c.backend.http.max_retries;
  b["backoff_ms"] = c.backend.http.backoff_ms;
  b["timeout_seconds"] = c.backend.http.timeout_seconds;
  b["concurrency"] = c.backend.http.concurrency;
  b["max_tokens"] = c.backend.max_tokens;
  b["request_seed"] = c.backend.request_seed ? ordered_json(*c.backend.request_seed) : ordered_json(nullptr);
  j["backend"] = b;
  ordered_json r = ordered_json::parse(ranker_config_to_json(c.ranker));
  r["method"] = c.method;
  j["ranker"] = r;
  j["ranknet"] = ordered_json::parse(ranknet_config_to_json(c.ranknet));
  j["retrieve_k"] = c.retrieve_k;
  if (include_paths) {
    const auto& p = c.paths;
    j["paths"] = {{"dataset", p.dataset}, {"corpus", p.corpus}, {"groups", p.groups},   {"val", p.val},
                  {"checkpoint", p.checkpoint}, {"pred", p.pred}, {"gold", p.gold}, {"index", p.index},
                  {"out", p.out},         {"cache_dir", p.cache_dir}};
  }
  return j.dump();
}

std::string config_digest(const PipelineConfig& config) { return sha256_hex(pipeline_config_to_json(config, false)); }

std::string Manifest::to_json() const {
  ordered_json j;
  j["subcommand"] = subcommand;
  j["config_digest"] = config_digest;
  j["prompt_version"] = prompt_version;
  j["provider"] = provider_identity;
  j["seed"] = seed;
  ordered_json in = ordered_json::object();
  for (const auto& [role, digest] : inputs) in[role] = digest;
  j["inputs"] = in;
  return j.dump();
}

std::string Manifest::digest() const { return sha256_hex(to_json()); }

std::filesystem::path manifest_path(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".manifest.json");
}

std::unique_ptr<LlmBackend> make_backend(const PipelineConfig& c) {
  if (c.backend.kind == "mock") {
    if (c.backend.fixture.empty()) throw ConfigError("mock backend needs backend.fixture");
    return MockBackend::from_fixture_file(c.backend.fixture);
  }
  HttpBackendConfig http = c.backend.http;
  http.models = c.models;
  return std::make_unique<HttpChatBackend>(http);
}

// --- updater ---------------------------------------------------------------------

Updater::Updater(const PipelineConfig& config, const EmbeddingProvider& provider, const ExampleIndex& index,
                 LlmBackend& backend, ResponseCache* cache)
    : config_(config),
      provider_(provider),
      index_(index),
      backend_(backend),
      cache_(cache),
      strategies_(expand_strategies(config.shots, config.temperature, config.models)) {
  if (strategies_.empty()) throw ConfigError("no strategies configured (strategies.models is empty)");
}

void Updater::set_cuprank(RankerParams params, RankerConfig config) {
  cuprank_.emplace(std::move(params), std::move(config));
}

void Updater::set_ranknet(RankNetParams params, RankNetConfig config) {
  ranknet_.emplace(std::move(params), std::move(config));
}

std::vector<RankedCandidate> Updater::rank(const CommentUpdateSample& sample,
                                           const std::vector<CandidateComment>& candidates) const {
  if (candidates.empty()) throw ContractError("nothing to rank");
  const std::string& method = config_.method;
  if (method == "cuprank") {
    if (!cuprank_) throw ConfigError("cuprank method needs a checkpoint");
    return rank_candidates(sample, candidates, cuprank_->first, cuprank_->second, provider_);
  }
  if (method == "ranknet") {
    if (!ranknet_) throw ConfigError("ranknet method needs a checkpoint");
    std::vector<RankedCandidate> out;
    for (const auto& c : candidates) {
      const Matrix x = ranknet_input(sample, c.text, provider_, static_cast<std::size_t>(ranknet_->second.max_seq_len));
      out.push_back({c, ranknet_score(x, ranknet_->first)});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    return out;
  }
  // Order-only baselines report a score of 0.
  std::vector<CandidateComment> ordered;
  if (method == "random") {
    ordered = random_rank(candidates, config_.seed ^ fnv1a64(sample.id.data(), sample.id.size()));
  } else if (candidates.size() == 1) {
    ordered = candidates;
  } else {
    SelfRankOptions opt;
    opt.model_id = config_.models.front();
    opt.temperature = config_.temperature;
    opt.max_tokens = config_.backend.max_tokens;
    ordered = self_rank(sample, candidates, backend_, cache_, opt);
  }
  std::vector<RankedCandidate> out;
  for (auto& c : ordered) out.push_back({std::move(c), 0.0});
  return out;
}

UpdateOutcome Updater::update(const CommentUpdateSample& sample) const {
  GenerateOptions gen;
  gen.max_tokens = config_.backend.max_tokens;
  gen.seed = config_.backend.request_seed;
  auto candidates = generate_candidates(sample, strategies_, backend_, cache_, index_, gen);
  if (candidates.empty()) throw ValidationError("sample " + sample.id + ": every candidate was empty after normalization");
  UpdateOutcome out;
  out.id = sample.id;
  out.ranked = rank(sample, candidates);
  out.final_comment = out.ranked.front().candidate.text;
  return out;
}

// --- predictions ---------------------------------------------------------------------

std::string serialize_predictions(const std::vector<UpdateOutcome>& outcomes, const std::string& manifest_digest) {
  std::string out;
  if (!manifest_digest.empty()) out += ordered_json{{"manifest_digest", manifest_digest}}.dump() + "\n";
  for (const auto& o : outcomes) {
    ordered_json j;
    j["id"] = o.id;
    j["prediction"] = o.final_comment;
    j["ranked"] = ordered_json::array();
    for (const auto& r : o.ranked) j["ranked"].push_back(candidate_json(r));
    out += j.dump() + "\n";
  }
  return out;
}

std::map<std::string, std::string> load_predictions(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("prediction file not found: " + path.string());
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (j.is_object() && j.size() == 1 && j.contains("manifest_digest")) continue;
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("prediction") ||
        !j["prediction"].is_string())
      throw ValidationError(where + ": prediction records need string fields id and prediction");
    if (!out.emplace(j["id"].get<std::string>(), j["prediction"].get<std::string>()).second)
      throw ValidationError(where + ": duplicate prediction id " + j["id"].get<std::string>());
  }
  return out;
}

// --- subcommands -----------------------------------------------------------------------

RunResult run_augment(const PipelineConfig& c) {
  const auto& out = require_path(c.paths.out, "--out");
  const auto dataset = load_dataset(require_path(c.paths.dataset, "--dataset"));
  for (const auto& s : dataset)
    if (!s.new_comment) throw ValidationError("sample " + s.id + ": augment needs ground-truth new_comment");
  const auto provider = make_provider(c.provider);
  const auto index = open_index(c, load_corpus(c, dataset), *provider);
  auto backend = make_backend(c);
  auto cache = open_cache(c);
  GenerateOptions gen;
  gen.max_tokens = c.backend.max_tokens;
  gen.seed = c.backend.request_seed;
  const auto result = augment_dataset(dataset, expand_strategies(c.shots, c.temperature, c.models), *backend,
                                      cache.get(), index, gen);

  Manifest m = base_manifest("augment", c, provider.get());
  add_corpus_inputs(m, c);
  add_backend_inputs(m, c);
  const std::string digest = finish(m, out);
  write_file(out, serialize_groups(result.groups, digest));

  ordered_json s;
  s["samples_in"] = result.summary.samples_in;
  s["groups_out"] = result.summary.groups_out;
  s["discarded"] = result.summary.discarded;
  s["discarded_ids"] = result.summary.discarded_ids;
  s["manifest_digest"] = digest;
  return {digest, s.dump()};
}

RunResult run_train(const PipelineConfig& c) {
  const std::string out = c.paths.out.empty() ? require_path(c.paths.checkpoint, "--out") : c.paths.out;
  const auto provider = make_provider(c.provider);
  const auto train = load_groups(require_path(c.paths.groups, "--groups")).groups;
  const auto val = c.paths.val.empty() ? std::vector<AugmentedGroup>{} : load_groups(c.paths.val).groups;
  if (train.empty()) throw ValidationError("training group file is empty");

  Manifest m = base_manifest("train", c, provider.get());
  add_input(m, "groups", c.paths.groups);
  add_input(m, "val", c.paths.val);
  const std::string digest = m.digest();

  ordered_json s;
  s["method"] = c.method;
  s["train_groups"] = train.size();
  s["val_groups"] = val.size();
  if (c.method == "ranknet") {
    auto encode = [&](const std::vector<AugmentedGroup>& groups) {
      std::vector<std::vector<Matrix>> out_groups;
      const auto len = static_cast<std::size_t>(c.ranknet.max_seq_len);
      for (const auto& g : groups) {
        const auto sample = g.sample();
        std::vector<Matrix> xs{ranknet_input(sample, g.positive.text, *provider, len)};
        for (const auto& n : g.negatives) xs.push_back(ranknet_input(sample, n.text, *provider, len));
        out_groups.push_back(std::move(xs));
      }
      return out_groups;
    };
    const auto params = ranknet_train(encode(train), c.ranknet);
    save_ranknet(out, params, c.ranknet, provider->identity(), digest);
  } else if (c.method == "cuprank") {
    auto encode = [&](const std::vector<AugmentedGroup>& groups) {
      std::vector<EncodedGroup> encoded;
      for (const auto& g : groups)
        encoded.push_back(encode_group(g, *provider, static_cast<std::size_t>(c.ranker.max_seq_len)));
      return encoded;
    };
    const auto result = train_ranker(encode(train), encode(val), c.ranker);
    save_ranker(out, result.params, c.ranker, provider->identity(), digest);
    std::string log = ordered_json{{"manifest_digest", digest}}.dump() + "\n";
    for (const auto& r : result.log) {
      ordered_json e;
      e["instances"] = r.instances;
      e["step"] = r.step;
      e["train_loss"] = r.train_loss;
      e["val_loss"] = r.val_loss;
      log += e.dump() + "\n";
    }
    write_file(out + ".log.jsonl", log);
    s["checkpoints"] = result.log.size();
    s["best_checkpoint"] = result.best;
    s["best_val_loss"] = result.log[result.best].val_loss;
  } else {
    throw ConfigError("method '" + c.method + "' has nothing to train");
  }
  finish(m, out);
  s["checkpoint_sha256"] = sha256_file(out);
  s["manifest_digest"] = digest;
  return {digest, s.dump()};
}

RunResult run_update(const PipelineConfig& c) {
  const auto& out = require_path(c.paths.out, "--out");
  const auto dataset = load_dataset(require_path(c.paths.dataset, "--dataset"));
  const auto provider = make_provider(c.provider);
  const auto index = open_index(c, load_corpus(c, dataset), *provider);
  if (c.paths.corpus.empty() && *std::max_element(c.shots.begin(), c.shots.end()) > 0)
    logger()->warn("no retrieval corpus configured; demonstrations come from the dataset itself");
  auto backend = make_backend(c);
  auto cache = open_cache(c);
  Updater updater(c, *provider, index, *backend, cache.get());

  Manifest m = base_manifest("update", c, provider.get());
  add_corpus_inputs(m, c);
  add_backend_inputs(m, c);
  if (c.method == "cuprank") {
    auto loaded = load_ranker(require_path(c.paths.checkpoint, "--checkpoint"), provider->identity());
    RankerConfig expected = c.ranker;
    expected.seed = loaded.config.seed;
    if (!(expected == loaded.config))
      throw ConfigError("checkpoint " + c.paths.checkpoint + " was trained with a different ranker config");
    updater.set_cuprank(std::move(loaded.params), loaded.config);
    add_input(m, "checkpoint", c.paths.checkpoint);
  } else if (c.method == "ranknet") {
    auto loaded = load_ranknet(require_path(c.paths.checkpoint, "--checkpoint"), provider->identity());
    updater.set_ranknet(std::move(loaded.params), loaded.config);
    add_input(m, "checkpoint", c.paths.checkpoint);
  }

  std::vector<UpdateOutcome> outcomes;
  for (const auto& sample : dataset) outcomes.push_back(updater.update(sample));
  const std::string digest = finish(m, out);
  write_file(out, serialize_predictions(outcomes, digest));

  ordered_json s;
  s["samples"] = outcomes.size();
  s["method"] = c.method;
  s["manifest_digest"] = digest;
  return {digest, s.dump()};
}

RunResult run_evaluate(const PipelineConfig& c) {
  const auto& out = require_path(c.paths.out, "--out");
  const auto preds = load_predictions(require_path(c.paths.pred, "--pred"));
  const auto gold = load_dataset(require_path(c.paths.gold, "--gold"));
  const auto provider = make_provider(c.provider);
  const auto report = evaluate_corpus(preds, gold, *provider);

  Manifest m = base_manifest("evaluate", c, provider.get());
  add_input(m, "pred", c.paths.pred);
  add_input(m, "gold", c.paths.gold);
  const std::string digest = finish(m, out);
  write_file(out, report_to_jsonl(report, digest));
  write_file(out + ".crosstab.csv", crosstab_to_csv(report));

  ordered_json s;
  s["samples"] = report.rows.size();
  s["accuracy"] = report.averages.accuracy;
  s["aed"] = report.averages.aed;
  s["red"] = report.averages.red;
  s["bleu4"] = report.averages.bleu4;
  s["meteor"] = report.averages.meteor;
  s["f1"] = report.averages.f1;
  s["sentence_sim"] = report.averages.sentence_sim;
  s["manifest_digest"] = digest;
  return {digest, s.dump()};
}

RunResult run_classify(const PipelineConfig& c) {
  const auto& out = require_path(c.paths.out, "--out");
  const auto dataset = load_dataset(require_path(c.paths.dataset, "--dataset"));
  Manifest m = base_manifest("type", c, nullptr);
  add_input(m, "dataset", c.paths.dataset);
  const std::string digest = finish(m, out);

  std::string text = ordered_json{{"manifest_digest", digest}}.dump() + "\n";
  std::map<std::string, std::size_t> counts;
  for (const auto& s : dataset) {
    if (!s.new_comment) throw ValidationError("sample " + s.id + ": type needs ground-truth new_comment");
    const auto t = classify_update_type(s);
    ordered_json j;
    j["id"] = s.id;
    j["source"] = update_source_name(t.source);
    j["count"] = update_count_name(t.count);
    text += j.dump() + "\n";
    ++counts[std::string(update_source_name(t.source)) + "/" + update_count_name(t.count)];
  }
  write_file(out, text);
  ordered_json s;
  s["samples"] = dataset.size();
  s["types"] = counts;
  s["manifest_digest"] = digest;
  return {digest, s.dump()};
}

RunResult run_retrieve(const PipelineConfig& c) {
  const auto& out = require_path(c.paths.out, "--out");
  const auto queries = load_dataset(require_path(c.paths.dataset, "--dataset"));
  const auto provider = make_provider(c.provider);
  const auto index = open_index(c, load_corpus(c, queries), *provider);
  Manifest m = base_manifest("retrieve", c, provider.get());
  add_corpus_inputs(m, c);
  const std::string digest = finish(m, out);

  std::string text = ordered_json{{"manifest_digest", digest}}.dump() + "\n";
  for (const auto& q : queries) {
    ordered_json j;
    j["id"] = q.id;
    j["neighbors"] = ordered_json::array();
    for (const auto& hit : index.top_k(q.new_code, static_cast<std::size_t>(c.retrieve_k), q.id))
      j["neighbors"].push_back({{"id", hit.sample->id}, {"similarity", hit.similarity}});
    text += j.dump() + "\n";
  }
  write_file(out, text);
  ordered_json s;
  s["queries"] = queries.size();
  s["corpus"] = index.size();
  s["k"] = c.retrieve_k;
  s["manifest_digest"] = digest;
  return {digest, s.dump()};
}

}  // namespace cup

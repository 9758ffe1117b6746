// Command-line front end. Talks to the library only through cup.h.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cup/cup.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Flags {
  std::string config;
  std::string dataset, corpus, groups, val, checkpoint, pred, gold, index, out, cache_dir;
  std::vector<std::string> models;
  std::vector<int> shots;
  std::optional<double> temperature;
  std::optional<unsigned long long> seed;
  std::string method;
  std::optional<int> k;
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

int fail(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << "error: code=" << code << " message=\"" << escape(message) << "\"\n";
  return exit_code;
}

// Paths inside a config file are relative to that file.
void resolve(ordered_json& node, const char* key, const fs::path& base) {
  if (!node.is_object() || !node.contains(key) || !node[key].is_string()) return;
  const std::string value = node[key].get<std::string>();
  if (value.empty() || fs::path(value).is_absolute()) return;
  node[key] = (base / value).lexically_normal().string();
}

ordered_json load_config(const std::string& path) {
  if (path.empty()) return ordered_json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  ordered_json j = ordered_json::parse(ss.str());
  const fs::path base = fs::path(path).parent_path();
  if (j.contains("paths"))
    for (auto& [key, value] : j["paths"].items()) resolve(j["paths"], key.c_str(), base);
  if (j.contains("backend")) resolve(j["backend"], "fixture", base);
  if (j.contains("provider")) resolve(j["provider"], "model_path", base);
  return j;
}

void apply(ordered_json& j, const Flags& f) {
  auto set_path = [&](const char* key, const std::string& v) {
    if (!v.empty()) j["paths"][key] = v;
  };
  set_path("dataset", f.dataset);
  set_path("corpus", f.corpus);
  set_path("groups", f.groups);
  set_path("val", f.val);
  set_path("checkpoint", f.checkpoint);
  set_path("pred", f.pred);
  set_path("gold", f.gold);
  set_path("index", f.index);
  set_path("out", f.out);
  set_path("cache_dir", f.cache_dir);
  if (!f.models.empty()) j["strategies"]["models"] = f.models;
  if (!f.shots.empty()) j["strategies"]["shots"] = f.shots;
  if (f.temperature) j["strategies"]["temperature"] = *f.temperature;
  if (f.seed) j["seed"] = *f.seed;
  if (!f.method.empty()) j["ranker"]["method"] = f.method;
  if (f.k) j["retrieve_k"] = *f.k;
}

using Runner = cup_status (*)(cup_context*, char**);

int execute(const Flags& flags, Runner runner) {
  std::string config_text;
  try {
    ordered_json j = load_config(flags.config);
    apply(j, flags);
    config_text = j.dump();
  } catch (const std::exception& e) {
    return fail("config", e.what(), CUP_CONFIG);
  }
  cup_context* ctx = nullptr;
  cup_status st = cup_context_create(config_text.c_str(), &ctx);
  if (st != CUP_OK) return fail(cup_status_name(st), cup_thread_last_error(), st);
  char* summary = nullptr;
  st = runner(ctx, &summary);
  int rc = 0;
  if (st == CUP_OK) {
    std::cout << summary << "\n";
  } else {
    rc = fail(cup_status_name(st), cup_last_error(ctx), st);
  }
  cup_string_free(summary);
  cup_context_destroy(ctx);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Comment updating with candidate generation and learned ranking"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cup_version()));

  Flags flags;
  struct Sub {
    CLI::App* app;
    Runner runner;
  };
  std::vector<Sub> subs;

  auto add = [&](const char* name, const char* help, Runner runner) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "seed recorded in every output");
    sub->add_option("--out", flags.out, "output file");
    subs.push_back({sub, runner});
    return sub;
  };
  auto generation = [&](CLI::App* sub) {
    sub->add_option("--dataset", flags.dataset, "samples (JSONL)");
    sub->add_option("--corpus", flags.corpus, "retrieval corpus (JSONL); defaults to the dataset");
    sub->add_option("--index", flags.index, "cached retrieval index");
    sub->add_option("--models", flags.models, "model ids")->delimiter(',');
    sub->add_option("--shots", flags.shots, "demonstration counts, e.g. 0,1,3,5")->delimiter(',');
    sub->add_option("--temperature", flags.temperature, "sampling temperature");
    sub->add_option("--cache-dir", flags.cache_dir, "response cache directory");
  };

  generation(add("augment", "build ranking groups from a labelled dataset", cup_augment));

  CLI::App* train = add("train", "train the ranker on group files", cup_train);
  train->add_option("--groups", flags.groups, "training groups");
  train->add_option("--val", flags.val, "validation groups");
  train->add_option("--method", flags.method, "cuprank or ranknet");

  CLI::App* update = add("update", "generate, rank and pick updated comments", cup_update);
  generation(update);
  update->add_option("--checkpoint", flags.checkpoint, "trained ranker");
  update->add_option("--method", flags.method, "cuprank, ranknet, random or self");

  CLI::App* evaluate = add("evaluate", "score predictions against ground truth", cup_evaluate);
  evaluate->add_option("--pred", flags.pred, "predictions (JSONL)");
  evaluate->add_option("--gold", flags.gold, "ground-truth samples (JSONL)");

  CLI::App* type = add("type", "classify update types of a labelled dataset", cup_classify);
  type->add_option("--dataset", flags.dataset, "samples (JSONL)");

  CLI::App* retrieve = add("retrieve", "nearest examples for each query sample", cup_retrieve);
  retrieve->add_option("--dataset", flags.dataset, "query samples (JSONL)");
  retrieve->add_option("--corpus", flags.corpus, "retrieval corpus (JSONL)");
  retrieve->add_option("--index", flags.index, "cached retrieval index");
  retrieve->add_option("--k", flags.k, "neighbours per query");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 64);
  }
  for (const auto& s : subs)
    if (s.app->parsed()) return execute(flags, s.runner);
  return fail("usage", "no subcommand", 64);
}

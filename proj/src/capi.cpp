#include "cup/cup.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "json.hpp"

#include "cup/error.hpp"
#include "cup/metrics.hpp"
#include "cup/pipeline.hpp"
#include "cup/rank.hpp"

struct cup_context {
  cup::PipelineConfig config;
  std::string last_error;
};

namespace {

thread_local std::string g_thread_error;

cup_status to_status(cup::ErrorCode code) { return static_cast<cup_status>(static_cast<int>(code)); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs fn, mapping exceptions to a status and recording the message.
template <typename Fn>
cup_status guarded(std::string& error_slot, Fn&& fn) {
  try {
    fn();
    error_slot.clear();
    return CUP_OK;
  } catch (const cup::Error& e) {
    error_slot = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    error_slot = "out of memory";
    return CUP_INTERNAL;
  } catch (const std::exception& e) {
    error_slot = e.what();
    return CUP_INTERNAL;
  }
}

template <typename Fn>
cup_status stateless(Fn&& fn) {
  return guarded(g_thread_error, std::forward<Fn>(fn));
}

void require(const void* p, const char* what) {
  if (!p) throw cup::Error(cup::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

cup_status run(cup_context* ctx, char** summary_json, cup::RunResult (*fn)(const cup::PipelineConfig&)) {
  if (!ctx) {
    g_thread_error = "context must not be NULL";
    return CUP_INVALID_ARGUMENT;
  }
  return guarded(ctx->last_error, [&] {
    const auto result = fn(ctx->config);
    if (summary_json) *summary_json = dup_string(result.summary_json);
  });
}

}  // namespace

extern "C" {

const char* cup_status_name(cup_status status) {
  if (status == CUP_OK) return "ok";
  if (status < CUP_INVALID_ARGUMENT || status > CUP_INTERNAL) return "unknown";
  return cup::error_code_name(static_cast<cup::ErrorCode>(status));
}

const char* cup_version(void) { return "1.0.0"; }

cup_status cup_context_create(const char* config_json, cup_context** out) {
  return stateless([&] {
    require(out, "out");
    *out = nullptr;
    auto ctx = std::make_unique<cup_context>();
    ctx->config = cup::parse_pipeline_config(config_json ? config_json : "");
    *out = ctx.release();
  });
}

void cup_context_destroy(cup_context* ctx) { delete ctx; }

const char* cup_last_error(const cup_context* ctx) { return ctx ? ctx->last_error.c_str() : g_thread_error.c_str(); }

cup_status cup_context_config(cup_context* ctx, char** config_json) {
  if (!ctx) return stateless([] { require(nullptr, "ctx"); });
  return guarded(ctx->last_error, [&] {
    require(config_json, "config_json");
    *config_json = dup_string(cup::pipeline_config_to_json(ctx->config));
  });
}

cup_status cup_augment(cup_context* ctx, char** s) { return run(ctx, s, cup::run_augment); }
cup_status cup_train(cup_context* ctx, char** s) { return run(ctx, s, cup::run_train); }
cup_status cup_update(cup_context* ctx, char** s) { return run(ctx, s, cup::run_update); }
cup_status cup_evaluate(cup_context* ctx, char** s) { return run(ctx, s, cup::run_evaluate); }
cup_status cup_classify(cup_context* ctx, char** s) { return run(ctx, s, cup::run_classify); }
cup_status cup_retrieve(cup_context* ctx, char** s) { return run(ctx, s, cup::run_retrieve); }

void cup_string_free(char* s) { std::free(s); }

const char* cup_thread_last_error(void) { return g_thread_error.c_str(); }

cup_status cup_accuracy(const char* updated, const char* ground_truth, int* out) {
  return stateless([&] {
    require(updated, "updated");
    require(ground_truth, "ground_truth");
    require(out, "out");
    *out = cup::accuracy(updated, ground_truth);
  });
}

cup_status cup_bleu4(const char* updated, const char* ground_truth, double* out) {
  return stateless([&] {
    require(updated, "updated");
    require(ground_truth, "ground_truth");
    require(out, "out");
    *out = cup::bleu4(updated, ground_truth);
  });
}

cup_status cup_meteor(const char* updated, const char* ground_truth, double* out) {
  return stateless([&] {
    require(updated, "updated");
    require(ground_truth, "ground_truth");
    require(out, "out");
    *out = cup::meteor(updated, ground_truth);
  });
}

cup_status cup_rouge_l(const char* updated, const char* ground_truth, double* out) {
  return stateless([&] {
    require(updated, "updated");
    require(ground_truth, "ground_truth");
    require(out, "out");
    *out = cup::rouge_l_f1(updated, ground_truth);
  });
}

cup_status cup_listwise_loss(double positive, const double* negatives, size_t count, double lambda, double* out) {
  return stateless([&] {
    require(out, "out");
    if (count > 0) require(negatives, "negatives");
    *out = cup::listwise_loss(positive, std::vector<double>(negatives, negatives + count), lambda);
  });
}

cup_status cup_camel_split(const char* token, char** parts_json) {
  return stateless([&] {
    require(token, "token");
    require(parts_json, "parts_json");
    *parts_json = dup_string(nlohmann::json(cup::camel_case_split(token)).dump());
  });
}

}  // extern "C"

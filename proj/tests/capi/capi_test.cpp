#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "cup/cup.h"

TEST_CASE("status names and version") {
  CHECK(std::strcmp(cup_status_name(CUP_OK), "ok") == 0);
  CHECK(std::strcmp(cup_status_name(CUP_PARSE), "parse") == 0);
  CHECK(std::strcmp(cup_status_name(CUP_TRANSPORT), "transport") == 0);
  CHECK(std::strcmp(cup_status_name(static_cast<cup_status>(99)), "unknown") == 0);
  CHECK(std::strlen(cup_version()) > 0);
}

TEST_CASE("stateless helpers") {
  int acc = -1;
  REQUIRE(cup_accuracy("Returns the getName", "returns the get name", &acc) == CUP_OK);
  CHECK(acc == 1);
  double v = 0;
  REQUIRE(cup_bleu4("a b c d", "a b c d e", &v) == CUP_OK);
  CHECK(v == doctest::Approx(std::exp(-0.25)));
  REQUIRE(cup_meteor("a b", "a b", &v) == CUP_OK);
  CHECK(v == doctest::Approx(0.9375));
  REQUIRE(cup_rouge_l("a b", "a c", &v) == CUP_OK);
  CHECK(v == doctest::Approx(0.5));

  const double neg[] = {0.5, 0.5};
  REQUIRE(cup_listwise_loss(0.5, neg, 2, 0.07, &v) == CUP_OK);
  CHECK(v == doctest::Approx(std::log(3.0)));
  CHECK(cup_listwise_loss(0.5, neg, 0, 0.07, &v) == CUP_CONTRACT);
  CHECK(std::strlen(cup_thread_last_error()) > 0);

  char* parts = nullptr;
  REQUIRE(cup_camel_split("HTTPServer2x", &parts) == CUP_OK);
  CHECK(std::string(parts) == R"(["HTTP","Server","2","x"])");
  cup_string_free(parts);

  CHECK(cup_accuracy(nullptr, "x", &acc) == CUP_INVALID_ARGUMENT);
  CHECK(cup_bleu4("x", "y", nullptr) == CUP_INVALID_ARGUMENT);
}

TEST_CASE("contexts") {
  cup_context* ctx = nullptr;
  REQUIRE(cup_context_create(nullptr, &ctx) == CUP_OK);
  char* cfg = nullptr;
  REQUIRE(cup_context_config(ctx, &cfg) == CUP_OK);
  CHECK(std::string(cfg).find("\"provider\"") != std::string::npos);
  cup_string_free(cfg);

  // No dataset configured.
  char* summary = nullptr;
  CHECK(cup_augment(ctx, &summary) != CUP_OK);
  CHECK(summary == nullptr);
  CHECK(std::strlen(cup_last_error(ctx)) > 0);
  cup_context_destroy(ctx);

  ctx = nullptr;
  CHECK(cup_context_create("{not json", &ctx) == CUP_CONFIG);
  CHECK(ctx == nullptr);
  CHECK(cup_context_create(R"({"ranker": {"d_model": 10, "attention_heads": 3}})", &ctx) == CUP_CONFIG);
  CHECK(cup_augment(nullptr, &summary) == CUP_INVALID_ARGUMENT);
  cup_context_destroy(nullptr);
}

TEST_CASE("evaluate through the C interface") {
  const auto dir = std::filesystem::temp_directory_path() / "cup-capi-eval";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto gold = dir / "gold.jsonl";
  const auto pred = dir / "pred.jsonl";
  const auto out = dir / "report.jsonl";
  std::ofstream(gold) << R"j({"id":"a","old_code":"int f()","old_comment":"Returns one.","new_code":"int g()","new_comment":"Returns two."})j"
                      << "\n";
  std::ofstream(pred) << R"({"id":"a","prediction":"Returns two."})" << "\n";
  const std::string config = R"({"provider":{"name":"stub","dimension":16},"paths":{"pred":")" + pred.string() +
                             R"(","gold":")" + gold.string() + R"(","out":")" + out.string() + R"("}})";
  cup_context* ctx = nullptr;
  REQUIRE(cup_context_create(config.c_str(), &ctx) == CUP_OK);
  char* summary = nullptr;
  const cup_status st = cup_evaluate(ctx, &summary);
  INFO(cup_last_error(ctx));
  REQUIRE(st == CUP_OK);
  CHECK(std::string(summary).find("\"accuracy\":1.0") != std::string::npos);
  cup_string_free(summary);
  cup_context_destroy(ctx);
  CHECK(std::filesystem::exists(out));
  CHECK(std::filesystem::exists(dir / "report.jsonl.manifest.json"));
}

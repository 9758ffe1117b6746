#include <set>

#include "doctest.h"

#include "cup/error.hpp"
#include "cup/rng.hpp"
#include "cup/tokenize.hpp"

using namespace cup;

namespace {

ProviderConfig stub(int dim = 768, std::uint64_t seed = 1) {
  ProviderConfig c;
  c.dimension = dim;
  c.seed = seed;
  return c;
}

bool contains(const TokenSequence& seq, const std::string& tok) {
  for (const auto& t : seq.tokens)
    if (t == tok) return true;
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

TEST_CASE("camel_case_split") {
  CHECK(camel_case_split("getName") == std::vector<std::string>{"get", "Name"});
  CHECK(camel_case_split("HTTPServer2x") == std::vector<std::string>{"HTTP", "Server", "2", "x"});
  CHECK(camel_case_split("lowercase") == std::vector<std::string>{"lowercase"});
  CHECK(camel_case_split("").empty());
  CHECK(camel_case_split("parseXMLToJSON") == std::vector<std::string>{"parse", "XML", "To", "JSON"});

  SUBCASE("concatenation is preserved for arbitrary bytes") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
      std::string s;
      const auto len = rng.below(20);
      for (std::uint64_t i = 0; i < len; ++i) s.push_back(static_cast<char>(rng.below(256)));
      std::string joined;
      for (const auto& part : camel_case_split(s)) {
        CHECK_FALSE(part.empty());
        joined += part;
      }
      CHECK(joined == s);
    }
  }
}

TEST_CASE("stub tokenizer: sentinels, subwords and round trip") {
  const auto p = make_provider(stub());
  const auto seq = subword_tokenize("updateVersion", *p);
  CHECK(contains(seq, "update"));
  CHECK(contains(seq, "Version"));
  CHECK(seq.tokens.front() == kBosToken);
  CHECK(seq.tokens.back() == kEosToken);

  CHECK(subword_tokenize("", *p).tokens == std::vector<std::string>{std::string(kBosToken), std::string(kEosToken)});
  CHECK(detokenize(subword_tokenize("return x;", *p)) == "return x;");

  SUBCASE("round trip over code lines") {
    const std::vector<std::string> lines = {
        "public int getSize() {",      "    return this.bufferSize;", "}", "if (a  ==  b) { x += 2; }",
        "for (int i = 0; i < n; ++i)", "\tfoo(bar, baz);",            "// TODO: handle HTTP2x",
        "String s = \"quoted\";",      "a\n  b\r\n c",                "x=y*z-1.5e3;"};
    SplitMix64 rng(11);
    std::vector<std::string> corpus = lines;
    const std::string alphabet = "abcXYZ019 _.;(){}\t\"=+-*/<>";
    while (corpus.size() < 100) {
      std::string s;
      const auto len = 1 + rng.below(40);
      for (std::uint64_t i = 0; i < len; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
      corpus.push_back(s);
    }
    for (const auto& line : corpus) CHECK(trim(detokenize(subword_tokenize(line, *p))) == trim(line));
  }
}

TEST_CASE("stub embeddings") {
  const auto p = make_provider(stub(768));
  const auto seq = subword_tokenize("foo bar foo", *p);
  const Matrix m = embed_tokens(seq, *p);
  CHECK(m.rows() == static_cast<Eigen::Index>(seq.size()));
  CHECK(m.cols() == 768);

  SUBCASE("identical tokens give identical rows") {
    const auto s2 = TokenSequence{{"foo", "x", "foo"}};
    const Matrix e = embed_tokens(s2, *p);
    CHECK(e.row(0) == e.row(2));
  }

  SUBCASE("five tokens, width 768") {
    CHECK(embed_tokens(TokenSequence{{"a", "b", "c", "d", "e"}}, *p).rows() == 5);
  }

  SUBCASE("cosine is exact and reproducible") {
    const auto foo = p->embed_token("foo");
    const auto bar = p->embed_token("bar");
    CHECK(cosine(foo, foo) == doctest::Approx(1.0).epsilon(1e-15));
    const auto again = make_provider(stub(768));
    CHECK(cosine(foo, bar) == cosine(again->embed_token("foo"), again->embed_token("bar")));
    CHECK(foo.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("seed changes the space") {
    const auto other = make_provider(stub(768, 2));
    CHECK(other->embed_token("foo") != p->embed_token("foo"));
    CHECK(other->identity() != p->identity());
  }
}

TEST_CASE("sentence_embed") {
  const auto p = make_provider(stub(64));
  const std::vector<std::string> texts = {"a", "b", "return x;", "return y;", "foo bar", "bar foo",
                                          "int getSize()", "void setSize(int s)", "x", "xx"};
  std::vector<Vector> vs;
  for (const auto& t : texts) {
    vs.push_back(sentence_embed(t, *p));
    CHECK(vs.back().size() == 64);
    CHECK(sentence_embed(t, *p) == vs.back());
  }
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j) CHECK(vs[i] != vs[j]);
  CHECK(sentence_embed(std::string(5000, 'q'), *p).size() == 64);
}

TEST_CASE("provider configuration errors") {
  ProviderConfig c;
  c.name = "codebert-remote";
  CHECK_THROWS_AS(make_provider(c), ConfigError);
  c.name = "table";
  c.model_path = "/nonexistent/table";
  CHECK_THROWS_AS(make_provider(c), Error);
  c = stub(0);
  CHECK_THROWS_AS(make_provider(c), ConfigError);
}

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cup/sample.hpp"
#include "cup/tokenize.hpp"

namespace cup {

// --- token-level matching protocol -----------------------------------------

// Step 1: drop markdown fences, language tags, inline markers, prompt labels,
// comment delimiters and newlines.
std::string strip_formatting(std::string_view text);

// Steps 1-3: strip, camel-case split (punctuation kept as single tokens),
// lowercase.
std::vector<std::string> protocol_tokens(std::string_view text);

// Words for the edit-distance and n-gram metrics: whitespace split after step
// 1, case preserved, no camel splitting.
std::vector<std::string> metric_words(std::string_view text);

int accuracy(std::string_view updated, std::string_view ground_truth);

std::size_t aed(std::string_view updated, std::string_view ground_truth);

// Aed(updated, gt) / Aed(old, gt); nullopt when the denominator is zero.
std::optional<double> red(std::string_view updated, std::string_view ground_truth, std::string_view old_comment);

// Sentence BLEU, n <= 4, brevity penalty, add-one smoothing for n > 1.
double bleu4(std::string_view updated, std::string_view ground_truth);

class SynonymSource {
 public:
  virtual ~SynonymSource() = default;
  virtual bool are_synonyms(std::string_view a, std::string_view b) const = 0;
};

struct MeteorOptions {
  bool use_stems = true;
  const SynonymSource* synonyms = nullptr;  // synonym stage off when null
};

double meteor(std::string_view updated, std::string_view ground_truth, const MeteorOptions& options = {});

// Word-level ROUGE-L F1.
double rouge_l_f1(std::string_view updated, std::string_view ground_truth);

double sentence_sim(std::string_view updated, std::string_view ground_truth, const EmbeddingProvider& provider);

// Porter (1980) stemmer on a lowercase ASCII word.
std::string porter_stem(std::string_view word);

// --- update-type taxonomy ---------------------------------------------------

enum class UpdateSource { kCodeInd, kNonCodeInd };
enum class UpdateCount { kSingleToken, kSingleSubToken, kMultiTokens };

const char* update_source_name(UpdateSource s);
const char* update_count_name(UpdateCount c);

struct UpdateType {
  UpdateSource source = UpdateSource::kNonCodeInd;
  UpdateCount count = UpdateCount::kMultiTokens;

  bool operator==(const UpdateType&) const = default;
};

// Requires a ground-truth comment that differs from the old one under the
// matching protocol; ContractError otherwise.
UpdateType classify_update_type(const CommentUpdateSample& sample);

// --- corpus report ----------------------------------------------------------

struct MetricRow {
  std::string id;
  int accuracy = 0;
  std::size_t aed = 0;
  std::optional<double> red;
  double bleu4 = 0.0;
  double meteor = 0.0;
  double f1 = 0.0;
  double sentence_sim = 0.0;
  UpdateType update_type;
};

struct CrossTabCell {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

struct MetricAverages {
  double accuracy = 0.0;
  double aed = 0.0;
  double red = 0.0;
  std::size_t red_defined = 0;
  double bleu4 = 0.0;
  double meteor = 0.0;
  double f1 = 0.0;
  double sentence_sim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  MetricAverages averages;
  // [source][count]
  std::array<std::array<CrossTabCell, 3>, 2> crosstab{};
};

// predictions: id -> updated comment. Gold samples must all carry a ground
// truth. ContractError listing missing/extra ids on mismatch.
MetricReport evaluate_corpus(const std::map<std::string, std::string>& predictions,
                             const std::vector<CommentUpdateSample>& gold, const EmbeddingProvider& provider);

// One JSON object per row, then a {"summary": ...} line.
std::string report_to_jsonl(const MetricReport& report, const std::string& manifest_digest);
std::string crosstab_to_csv(const MetricReport& report);

}  // namespace cup

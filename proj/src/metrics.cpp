#include "cup/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cup/error.hpp"
#include "cup/flatten.hpp"
#include "cup/prompt.hpp"

namespace cup {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string ascii_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Alphanumeric runs are camel-split and lowercased; every other
// non-whitespace byte is its own token.
std::vector<std::string> subtokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (!is_word_byte(c)) {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
    for (auto& part : camel_case_split(text.substr(i, j - i))) out.push_back(ascii_lower(std::move(part)));
    i = j;
  }
  return out;
}

bool is_alnum_token(const std::string& t) {
  return std::any_of(t.begin(), t.end(), [](unsigned char c) { return is_word_byte(c); });
}

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

template <typename T>
std::size_t levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct Hunk {
  std::vector<std::string> deleted;
  std::vector<std::string> inserted;
};

std::vector<Hunk> hunks(const EditSequence& seq) {
  std::vector<Hunk> out;
  bool open = false;
  for (const auto& t : seq) {
    if (t.op == EditOp::kEqual) {
      open = false;
      continue;
    }
    if (!open) out.emplace_back();
    open = true;
    (t.op == EditOp::kDelete ? out.back().deleted : out.back().inserted).push_back(t.token);
  }
  return out;
}

std::size_t changed_units(const std::vector<Hunk>& hs) {
  std::size_t n = 0;
  for (const auto& h : hs) n += std::max(h.deleted.size(), h.inserted.size());
  return n;
}

}  // namespace

std::string strip_formatting(std::string_view text) {
  return clean_response(text, default_response_labels(), true);
}

std::vector<std::string> protocol_tokens(std::string_view text) { return subtokens(strip_formatting(text)); }

std::vector<std::string> metric_words(std::string_view text) { return split_ws(strip_formatting(text)); }

int accuracy(std::string_view updated, std::string_view ground_truth) {
  return protocol_tokens(updated) == protocol_tokens(ground_truth) ? 1 : 0;
}

std::size_t aed(std::string_view updated, std::string_view ground_truth) {
  return levenshtein(metric_words(updated), metric_words(ground_truth));
}

std::optional<double> red(std::string_view updated, std::string_view ground_truth, std::string_view old_comment) {
  const std::size_t denom = aed(old_comment, ground_truth);
  if (denom == 0) return std::nullopt;
  return static_cast<double>(aed(updated, ground_truth)) / static_cast<double>(denom);
}

double bleu4(std::string_view updated, std::string_view ground_truth) {
  const auto hyp = metric_words(updated);
  const auto ref = metric_words(ground_truth);
  if (hyp.empty() && ref.empty()) return 1.0;
  if (hyp.empty() || ref.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, std::size_t> ref_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i)
      ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
    std::map<std::vector<std::string>, std::size_t> hyp_counts;
    std::size_t total = 0;
    for (std::size_t i = 0; i + n <= hyp.size(); ++i, ++total)
      ++hyp_counts[std::vector<std::string>(hyp.begin() + i, hyp.begin() + i + n)];
    std::size_t matched = 0;
    for (const auto& [gram, count] : hyp_counts) {
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    double p;
    if (n == 1) {
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / 4.0);
}

double meteor(std::string_view updated, std::string_view ground_truth, const MeteorOptions& options) {
  std::vector<std::string> hyp = metric_words(updated);
  std::vector<std::string> ref = metric_words(ground_truth);
  for (auto& w : hyp) w = ascii_lower(w);
  for (auto& w : ref) w = ascii_lower(w);
  if (hyp.empty() || ref.empty()) return 0.0;

  std::vector<long> hyp_to_ref(hyp.size(), -1);
  std::vector<bool> ref_used(ref.size(), false);
  auto stage = [&](auto&& same) {
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      if (hyp_to_ref[i] >= 0) continue;
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!ref_used[j] && same(hyp[i], ref[j])) {
          hyp_to_ref[i] = static_cast<long>(j);
          ref_used[j] = true;
          break;
        }
      }
    }
  };
  stage([](const std::string& a, const std::string& b) { return a == b; });
  if (options.use_stems) {
    stage([](const std::string& a, const std::string& b) { return porter_stem(a) == porter_stem(b); });
  }
  if (options.synonyms) {
    stage([&](const std::string& a, const std::string& b) { return options.synonyms->are_synonyms(a, b); });
  }

  std::size_t matches = 0, chunks = 0;
  long prev_ref = -2;
  bool prev_matched = false;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    if (hyp_to_ref[i] < 0) {
      prev_matched = false;
      continue;
    }
    ++matches;
    if (!prev_matched || hyp_to_ref[i] != prev_ref + 1) ++chunks;
    prev_ref = hyp_to_ref[i];
    prev_matched = true;
  }
  if (matches == 0) return 0.0;
  const double m = static_cast<double>(matches);
  const double precision = m / static_cast<double>(hyp.size());
  const double recall = m / static_cast<double>(ref.size());
  const double fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
  const double penalty = 0.5 * std::pow(static_cast<double>(chunks) / m, 3.0);
  return fmean * (1.0 - penalty);
}

double rouge_l_f1(std::string_view updated, std::string_view ground_truth) {
  const auto hyp = metric_words(updated);
  const auto ref = metric_words(ground_truth);
  if (hyp.empty() && ref.empty()) return 1.0;
  if (hyp.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(hyp, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

double sentence_sim(std::string_view updated, std::string_view ground_truth, const EmbeddingProvider& provider) {
  return cosine(provider.sentence_embed(updated), provider.sentence_embed(ground_truth));
}

const char* update_source_name(UpdateSource s) { return s == UpdateSource::kCodeInd ? "CodeInd" : "NonCodeInd"; }

const char* update_count_name(UpdateCount c) {
  switch (c) {
    case UpdateCount::kSingleToken: return "SingleToken";
    case UpdateCount::kSingleSubToken: return "SingleSubToken";
    case UpdateCount::kMultiTokens: return "MultiTokens";
  }
  return "?";
}

UpdateType classify_update_type(const CommentUpdateSample& sample) {
  if (!sample.new_comment) throw ContractError("sample " + sample.id + " has no ground-truth comment");
  const std::string& gt = *sample.new_comment;
  if (accuracy(sample.old_comment, gt) == 1) {
    throw ContractError("sample " + sample.id + ": comment unchanged under the matching protocol");
  }

  UpdateType type;
  const auto word_hunks = hunks(diff_tokens(metric_words(sample.old_comment), metric_words(gt)));
  const std::size_t changed = changed_units(word_hunks);
  if (changed >= 2) {
    type.count = UpdateCount::kMultiTokens;
  } else {
    type.count = UpdateCount::kSingleToken;
    if (word_hunks.size() == 1 && word_hunks[0].deleted.size() == 1 && word_hunks[0].inserted.size() == 1) {
      const auto sub = diff_tokens(subtokens(word_hunks[0].deleted[0]), subtokens(word_hunks[0].inserted[0]));
      const bool shares = std::any_of(sub.begin(), sub.end(), [](const EditToken& t) { return t.op == EditOp::kEqual; });
      if (shares && changed_units(hunks(sub)) == 1) type.count = UpdateCount::kSingleSubToken;
    }
  }

  std::set<std::string> comment_ins, comment_del, code_ins, code_del;
  for (const auto& t : diff_tokens(protocol_tokens(sample.old_comment), protocol_tokens(gt))) {
    if (!is_alnum_token(t.token)) continue;
    if (t.op == EditOp::kInsert) comment_ins.insert(t.token);
    if (t.op == EditOp::kDelete) comment_del.insert(t.token);
  }
  for (const auto& t : diff_tokens(subtokens(sample.old_code), subtokens(sample.new_code))) {
    if (!is_alnum_token(t.token)) continue;
    if (t.op == EditOp::kInsert) code_ins.insert(t.token);
    if (t.op == EditOp::kDelete) code_del.insert(t.token);
  }
  auto subset = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    return !a.empty() && std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  const bool indicative = comment_ins.empty() ? subset(comment_del, code_del) : subset(comment_ins, code_ins);
  type.source = indicative ? UpdateSource::kCodeInd : UpdateSource::kNonCodeInd;
  return type;
}

MetricReport evaluate_corpus(const std::map<std::string, std::string>& predictions,
                             const std::vector<CommentUpdateSample>& gold, const EmbeddingProvider& provider) {
  std::vector<std::string> missing, extra;
  std::set<std::string> gold_ids;
  for (const auto& s : gold) {
    gold_ids.insert(s.id);
    if (!predictions.count(s.id)) missing.push_back(s.id);
    if (!s.new_comment) throw ContractError("gold sample " + s.id + " has no ground-truth comment");
  }
  for (const auto& [id, text] : predictions)
    if (!gold_ids.count(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "prediction/gold id mismatch;";
    if (!missing.empty()) {
      msg += " missing predictions:";
      for (const auto& id : missing) msg += " " + id;
    }
    if (!extra.empty()) {
      msg += " unknown ids:";
      for (const auto& id : extra) msg += " " + id;
    }
    throw ContractError(msg);
  }

  MetricReport report;
  for (const auto& s : gold) {
    const std::string& up = predictions.at(s.id);
    const std::string& gt = *s.new_comment;
    MetricRow row;
    row.id = s.id;
    row.accuracy = accuracy(up, gt);
    row.aed = aed(up, gt);
    row.red = red(up, gt, s.old_comment);
    row.bleu4 = bleu4(up, gt);
    row.meteor = meteor(up, gt);
    row.f1 = rouge_l_f1(up, gt);
    row.sentence_sim = sentence_sim(up, gt, provider);
    row.update_type = classify_update_type(s);
    auto& cell = report.crosstab[static_cast<int>(row.update_type.source)][static_cast<int>(row.update_type.count)];
    ++cell.count;
    cell.correct += static_cast<std::size_t>(row.accuracy);
    report.rows.push_back(std::move(row));
  }

  auto& avg = report.averages;
  if (!report.rows.empty()) {
    const double n = static_cast<double>(report.rows.size());
    for (const auto& r : report.rows) {
      avg.accuracy += r.accuracy;
      avg.aed += static_cast<double>(r.aed);
      avg.bleu4 += r.bleu4;
      avg.meteor += r.meteor;
      avg.f1 += r.f1;
      avg.sentence_sim += r.sentence_sim;
      if (r.red) {
        avg.red += *r.red;
        ++avg.red_defined;
      }
    }
    avg.accuracy /= n;
    avg.aed /= n;
    avg.bleu4 /= n;
    avg.meteor /= n;
    avg.f1 /= n;
    avg.sentence_sim /= n;
    if (avg.red_defined) avg.red /= static_cast<double>(avg.red_defined);
  }
  return report;
}

std::string report_to_jsonl(const MetricReport& report, const std::string& manifest_digest) {
  using nlohmann::ordered_json;
  std::string out;
  for (const auto& r : report.rows) {
    ordered_json j;
    j["id"] = r.id;
    j["accuracy"] = r.accuracy;
    j["aed"] = r.aed;
    j["red"] = r.red ? ordered_json(*r.red) : ordered_json(nullptr);
    j["bleu4"] = r.bleu4;
    j["meteor"] = r.meteor;
    j["f1"] = r.f1;
    j["sentence_sim"] = r.sentence_sim;
    j["update_type"] = {{"source", update_source_name(r.update_type.source)},
                        {"count", update_count_name(r.update_type.count)}};
    out += j.dump() + "\n";
  }
  ordered_json s;
  s["manifest_digest"] = manifest_digest;
  s["samples"] = report.rows.size();
  s["accuracy"] = report.averages.accuracy;
  s["aed"] = report.averages.aed;
  s["red"] = report.averages.red;
  s["red_defined"] = report.averages.red_defined;
  s["bleu4"] = report.averages.bleu4;
  s["meteor"] = report.averages.meteor;
  s["f1"] = report.averages.f1;
  s["sentence_sim"] = report.averages.sentence_sim;
  ordered_json cells = ordered_json::array();
  for (int src = 0; src < 2; ++src) {
    for (int cnt = 0; cnt < 3; ++cnt) {
      const auto& cell = report.crosstab[src][cnt];
      cells.push_back({{"source", update_source_name(static_cast<UpdateSource>(src))},
                       {"count", update_count_name(static_cast<UpdateCount>(cnt))},
                       {"samples", cell.count},
                       {"accuracy", cell.accuracy()}});
    }
  }
  s["crosstab"] = cells;
  out += ordered_json({{"summary", s}}).dump() + "\n";
  return out;
}

std::string crosstab_to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "source,count,samples,correct,accuracy\n";
  for (int src = 0; src < 2; ++src) {
    for (int cnt = 0; cnt < 3; ++cnt) {
      const auto& cell = report.crosstab[src][cnt];
      out << update_source_name(static_cast<UpdateSource>(src)) << ','
          << update_count_name(static_cast<UpdateCount>(cnt)) << ',' << cell.count << ',' << cell.correct << ','
          << nlohmann::json(cell.accuracy()).dump() << '\n';
    }
  }
  return out.str();
}

}  // namespace cup

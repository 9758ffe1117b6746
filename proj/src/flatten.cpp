#include "cup/flatten.hpp"

#include <cstdint>

#include "cup/error.hpp"
#include "cup/log.hpp"

namespace cup {

const char* edit_op_name(EditOp op) {
  switch (op) {
    case EditOp::kEqual: return "equal";
    case EditOp::kInsert: return "insert";
    case EditOp::kDelete: return "delete";
  }
  return "?";
}

EditSequence diff_tokens(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  // Common prefix and suffix are always part of some LCS.
  std::size_t prefix = 0;
  while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
         a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
    ++suffix;
  }
  const std::size_t n = a.size() - prefix - suffix;
  const std::size_t m = b.size() - prefix - suffix;

  // lcs[i][j] = LCS length of a'[i:] and b'[j:] over the middle section.
  std::vector<std::uint32_t> lcs((n + 1) * (m + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return lcs[i * (m + 1) + j]; };
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      if (a[prefix + i] == b[prefix + j]) {
        at(i, j) = at(i + 1, j + 1) + 1;
      } else {
        at(i, j) = std::max(at(i + 1, j), at(i, j + 1));
      }
    }
  }

  EditSequence out;
  out.reserve(a.size() + b.size());
  for (std::size_t k = 0; k < prefix; ++k) out.push_back({a[k], EditOp::kEqual, Origin::kOld});

  std::size_t i = 0, j = 0, gap_i = 0, gap_j = 0;
  auto flush_gap = [&](std::size_t end_i, std::size_t end_j) {
    for (; gap_i < end_i; ++gap_i) out.push_back({a[prefix + gap_i], EditOp::kDelete, Origin::kOld});
    for (; gap_j < end_j; ++gap_j) out.push_back({b[prefix + gap_j], EditOp::kInsert, Origin::kNew});
  };
  while (i < n && j < m) {
    if (a[prefix + i] == b[prefix + j]) {
      flush_gap(i, j);
      out.push_back({a[prefix + i], EditOp::kEqual, Origin::kOld});
      gap_i = ++i;
      gap_j = ++j;
    } else if (at(i + 1, j) >= at(i, j + 1)) {
      ++i;
    } else {
      ++j;
    }
  }
  flush_gap(n, m);

  for (std::size_t k = a.size() - suffix; k < a.size(); ++k) out.push_back({a[k], EditOp::kEqual, Origin::kOld});
  return out;
}

std::vector<std::string> old_side(const EditSequence& seq) {
  std::vector<std::string> out;
  for (const auto& t : seq)
    if (t.op != EditOp::kInsert) out.push_back(t.token);
  return out;
}

std::vector<std::string> new_side(const EditSequence& seq) {
  std::vector<std::string> out;
  for (const auto& t : seq)
    if (t.op != EditOp::kDelete) out.push_back(t.token);
  return out;
}

namespace {

void truncate(EditSequence& seq, std::size_t max_len, const char* which, const std::string& id) {
  if (max_len == 0 || seq.size() <= max_len) return;
  logger()->info("sample {}: {} edit sequence truncated by {} tokens (max {})", id, which,
                 seq.size() - max_len, max_len);
  seq.resize(max_len);
}

}  // namespace

FlattenedPair flatten_sample(const CommentUpdateSample& sample, const std::string& candidate_text,
                             const EmbeddingProvider& provider, const FlattenOptions& options) {
  if (sample.old_code.empty()) throw ValidationError("sample " + sample.id + ": empty old_code");
  if (sample.old_comment.empty()) throw ValidationError("sample " + sample.id + ": empty old_comment");
  if (candidate_text.empty()) throw ContractError("sample " + sample.id + ": empty candidate comment");

  FlattenedPair pair;
  pair.code_change = token_diff(provider.tokenize(sample.old_code), provider.tokenize(sample.new_code));
  pair.comment_change = token_diff(provider.tokenize(sample.old_comment), provider.tokenize(candidate_text));
  truncate(pair.code_change, options.max_len, "code", sample.id);
  truncate(pair.comment_change, options.max_len, "comment", sample.id);
  return pair;
}

Matrix embed_edit_tokens(const EditSequence& seq, const EmbeddingProvider& provider) {
  const int dim = provider.dimension();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(seq.size()), dim + kEditFeatureWidth);
  for (std::size_t r = 0; r < seq.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    const Vector e = provider.embed_token(seq[r].token);
    if (e.size() != dim) throw ContractError("provider " + provider.name() + " returned wrong width");
    out.row(row).head(dim) = e.transpose();
    switch (seq[r].op) {
      case EditOp::kEqual: out(row, dim) = 1.0; break;
      case EditOp::kInsert: out(row, dim + 1) = 1.0; break;
      case EditOp::kDelete: out(row, dim + 2) = 1.0; break;
    }
    out(row, dim + 3) = seq[r].origin == Origin::kNew ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace cup

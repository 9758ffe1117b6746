#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cup/sample.hpp"
#include "cup/tokenize.hpp"

namespace cup {

enum class EditOp { kEqual, kInsert, kDelete };
enum class Origin { kOld, kNew };

const char* edit_op_name(EditOp op);

struct EditToken {
  std::string token;
  EditOp op = EditOp::kEqual;
  Origin origin = Origin::kOld;

  bool operator==(const EditToken&) const = default;
};

using EditSequence = std::vector<EditToken>;

// Minimal edit script from an LCS alignment. Within every gap between matched
// tokens, deletions are emitted before insertions. Equal tokens carry
// origin=old.
EditSequence diff_tokens(const std::vector<std::string>& old_tokens,
                         const std::vector<std::string>& new_tokens);

inline EditSequence token_diff(const TokenSequence& old_tokens, const TokenSequence& new_tokens) {
  return diff_tokens(old_tokens.tokens, new_tokens.tokens);
}

// Side reconstruction: old = equal+delete tokens, new = equal+insert tokens.
std::vector<std::string> old_side(const EditSequence& seq);
std::vector<std::string> new_side(const EditSequence& seq);

struct FlattenedPair {
  EditSequence code_change;     // sequence A
  EditSequence comment_change;  // sequence B
};

struct FlattenOptions {
  std::size_t max_len = 512;  // tail tokens beyond this are dropped
};

// code_change diffs old vs new code, comment_change diffs the old comment vs
// the candidate. Throws ValidationError on empty old code / old comment and
// ContractError on an empty candidate.
FlattenedPair flatten_sample(const CommentUpdateSample& sample, const std::string& candidate_text,
                             const EmbeddingProvider& provider, const FlattenOptions& options = {});

// Row i = [e_token | one-hot(op) equal,insert,delete | origin flag (new=1)];
// width provider.dimension() + 4.
Matrix embed_edit_tokens(const EditSequence& seq, const EmbeddingProvider& provider);

inline constexpr int kEditFeatureWidth = 4;

}  // namespace cup

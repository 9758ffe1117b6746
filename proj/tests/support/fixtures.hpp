#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cup/augment.hpp"
#include "cup/pipeline.hpp"
#include "cup/rank.hpp"
#include "cup/sample.hpp"
#include "cup/tokenize.hpp"

namespace cup::fixtures {

// Small stub provider and ranker dimensions used throughout the tests.
ProviderConfig desk_provider();
RankerConfig desk_ranker();

// Synthetic identifier-rename samples: a getter, setter or predicate whose
// field suffix changes, with the comment updated to match.
std::vector<CommentUpdateSample> rename_samples(std::size_t n, std::uint64_t seed, const std::string& id_prefix);

// Groups whose positive carries the marker word and whose negatives carry a
// random filler word at a random position instead.
inline constexpr const char* kMarker = "zqx";
std::vector<AugmentedGroup> separable_groups(std::size_t n, std::size_t negatives, std::uint64_t seed,
                                             const std::string& id_prefix);

// Three plausible wrong updates for a rename sample: the untouched old
// comment, the rename to a different field, and an over-edited ground truth.
std::vector<std::string> distractors(const CommentUpdateSample& sample, std::uint64_t seed);

inline constexpr const char* kMockModel = "mock-llm";

// Mock rules for four strategies (shots 0,1,3,5): per sample, exactly one
// strategy (rotating with the sample index) answers with the ground truth and
// the others with the distractors. Also answers the self-ranking prompt.
std::string mock_rules_json(const std::vector<CommentUpdateSample>& samples, std::uint64_t seed);

// Every strategy answers with the ground truth, so augmentation discards all.
std::string echo_truth_rules_json(const std::vector<CommentUpdateSample>& samples);

// Writes train/val/test datasets, mock rules and a config.json into dir.
struct EndToEndFiles {
  std::filesystem::path dir, train, val, test, mock, config;
};
EndToEndFiles write_end_to_end(const std::filesystem::path& dir, std::size_t train, std::size_t val,
                               std::size_t test, std::uint64_t seed);

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

}  // namespace cup::fixtures

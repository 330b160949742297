#ifndef LOGICCAR_HIERARCHY_HPP_
#define LOGICCAR_HIERARCHY_HPP_

// Two-level semantic hierarchy over primitives: verbs grouped by their action
// word, objects grouped by a majority vote over language-model answers.

#include "logiccar/label_space.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace logiccar {

struct Hierarchy {
  std::vector<Index> verb_parent;    // verb index -> coarse verb index
  std::vector<Index> object_parent;  // object index -> coarse object index
  std::vector<std::string> coarse_verb_names;
  std::vector<std::string> coarse_object_names;

  Index num_coarse_verbs() const { return static_cast<Index>(coarse_verb_names.size()); }
  Index num_coarse_objects() const { return static_cast<Index>(coarse_object_names.size()); }

  friend bool operator==(const Hierarchy&, const Hierarchy&) = default;
};

class HierarchyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Empty result means the hierarchy is total, in bounds, and every coarse
// category is non-empty.
std::vector<std::string> validate_hierarchy(const LabelSpace& ls, const Hierarchy& h);

struct Partition {
  std::vector<Index> parent;
  std::vector<std::string> names;  // coarse names in first-appearance order
};

// Action word = first whitespace-delimited token, lowercased.
Partition cluster_verbs(const std::vector<std::string>& verb_names);

// Lowercase, trim, strip trailing punctuation.
std::string normalize_coarse_name(std::string_view raw);

using TrialMapping = std::map<std::string, std::string>;  // object -> coarse name

struct TaxonomyVote {
  std::string object;
  std::vector<std::string> proposals;  // one per trial, normalized
  std::string chosen;
  bool tie = false;
};

struct VoteResult {
  Partition partition;
  std::vector<TaxonomyVote> votes;
};

// Majority vote per object; ties go to the lexicographically smallest name.
VoteResult aggregate_votes(const std::vector<std::string>& objects, const std::vector<TrialMapping>& trials);

// Every *.json file of `dir` (sorted by name) holds one trial as
// {"<object>": "<coarse name>", ...}.
std::vector<TrialMapping> read_vote_files(const std::filesystem::path& dir);

// Objects whose name has an underscore go under the suffix after the first
// underscore ("o3_oc1" -> "oc1"); anything else becomes its own category.
Partition heuristic_object_partition(const std::vector<std::string>& objects);

Hierarchy make_hierarchy(const Partition& verbs, const Partition& objects);

std::string hierarchy_to_json(const LabelSpace& ls, const Hierarchy& h);
Hierarchy hierarchy_from_json(std::string_view text, const LabelSpace& ls);
void write_hierarchy(const std::filesystem::path& path, const LabelSpace& ls, const Hierarchy& h);
Hierarchy read_hierarchy(const std::filesystem::path& path, const LabelSpace& ls);

// --- language-model taxonomy queries ---------------------------------------

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

extern const char* const kDefaultTaxonomyPrompt;  // placeholder: [OBJECT CATEGORY]
inline constexpr int kDefaultTrials = 19;

std::string render_prompt(std::string_view prompt_template, std::string_view object);

// Parses "A: <object> belongs to <name>." and returns the normalized name.
std::optional<std::string> parse_completion(std::string_view completion);

struct LlmEndpoint {
  std::string url;  // http(s)://host[:port]/path
  std::string key;
  std::string model = "deepseek-r1-distill-llama-70b";

  // LOGICCAR_LLM_ENDPOINT / LOGICCAR_LLM_KEY
  static std::optional<LlmEndpoint> from_env();
};

// Sends one prompt and returns the response body's "text" field.
using LlmTransport = std::function<std::string(const std::string& prompt)>;
LlmTransport http_transport(const LlmEndpoint& endpoint);

struct LlmQueryOptions {
  std::filesystem::path cache_dir;
  int trials = kDefaultTrials;
  std::string prompt_template = kDefaultTaxonomyPrompt;
  std::optional<LlmTransport> transport;  // none: cache only
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
};

struct ParseFailure {
  std::string object;
  int trial = 0;
  std::string response;
};

struct LlmTaxonomy {
  std::vector<TrialMapping> trials;
  std::vector<ParseFailure> parse_errors;
};

// Cache layout: <cache>/<slug(object)>/trial_<n>.txt with n in [0, trials).
std::filesystem::path cache_file(const std::filesystem::path& cache_dir, std::string_view object, int trial);

// Cached responses are used verbatim; misses go to the transport (retried with
// exponential backoff) and are written back to the cache.
LlmTaxonomy query_llm_taxonomy(const std::vector<std::string>& objects, const LlmQueryOptions& options);

}  // namespace logiccar

#endif  // LOGICCAR_HIERARCHY_HPP_

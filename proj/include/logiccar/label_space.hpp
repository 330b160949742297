#ifndef LOGICCAR_LABEL_SPACE_HPP_
#define LOGICCAR_LABEL_SPACE_HPP_

#include "logiccar/tensor.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logiccar {

class LabelSpaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Granularity : std::uint8_t { kComposition, kVerb, kObject, kCoarseVerb, kCoarseObject };

inline constexpr std::array<Granularity, 5> kAllGranularities = {
    Granularity::kComposition, Granularity::kVerb, Granularity::kObject, Granularity::kCoarseVerb,
    Granularity::kCoarseObject};

constexpr std::size_t index_of(Granularity g) { return static_cast<std::size_t>(g); }
std::string_view granularity_name(Granularity g);
std::optional<Granularity> parse_granularity(std::string_view name);

struct LabelRef {
  Granularity granularity = Granularity::kVerb;
  Index index = 0;
  friend auto operator<=>(const LabelRef&, const LabelRef&) = default;
};

enum class CompositionSplit : std::uint8_t { kSeen, kUnseenVal, kUnseenTest };

std::string_view split_name(CompositionSplit s);
CompositionSplit parse_split(std::string_view name);

struct Composition {
  Index verb = 0;
  Index object = 0;
  CompositionSplit split = CompositionSplit::kSeen;
  friend bool operator==(const Composition&, const Composition&) = default;
};

// Verbs V, objects O and the composition categories C (a strict subset of
// V x O) partitioned into seen and unseen splits.
struct LabelSpace {
  std::vector<std::string> verbs;
  std::vector<std::string> objects;
  std::vector<Composition> compositions;

  Index num_verbs() const { return static_cast<Index>(verbs.size()); }
  Index num_objects() const { return static_cast<Index>(objects.size()); }
  Index num_compositions() const { return static_cast<Index>(compositions.size()); }

  // "napkin fall like a feather": object first, then the verb phrase.
  std::string composition_name(Index c) const;
  std::vector<Index> compositions_in(CompositionSplit split) const;
  bool is_seen(Index c) const { return compositions.at(static_cast<std::size_t>(c)).split == CompositionSplit::kSeen; }
  std::optional<Index> find(Index verb, Index object) const;

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;
};

// Throws LabelSpaceError on: empty vocabularies, out-of-range indices,
// duplicate pairs, C == V x O, seen-split primitive coverage violations.
void validate_label_space(const LabelSpace& ls);

// Lowercase, every run of non-alphanumerics becomes a single '_', trimmed.
std::string slugify(std::string_view text);

std::string label_space_to_json(const LabelSpace& ls);
LabelSpace label_space_from_json(std::string_view text);
void write_label_space(const std::filesystem::path& path, const LabelSpace& ls);
LabelSpace read_label_space(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace logiccar

#endif  // LOGICCAR_LABEL_SPACE_HPP_

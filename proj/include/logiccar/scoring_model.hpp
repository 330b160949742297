#ifndef LOGICCAR_SCORING_MODEL_HPP_
#define LOGICCAR_SCORING_MODEL_HPP_

// Toy dual-branch scorer. Verb heads read the dynamic half of a feature,
// object heads the static half; composition logits are either the sum of the
// two primitive logits or come from a dedicated head over the whole feature.

#include "logiccar/diff_graph.hpp"
#include "logiccar/hierarchy.hpp"
#include "logiccar/label_space.hpp"
#include "logiccar/score_table.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace logiccar {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FusionMode : std::uint8_t { kAdditive, kDedicated };
enum class CoarseMode : std::uint8_t { kHeads, kMaxChildren };

std::string_view fusion_name(FusionMode m);
FusionMode parse_fusion(std::string_view s);
std::string_view coarse_mode_name(CoarseMode m);
CoarseMode parse_coarse_mode(std::string_view s);

struct LinearHead {
  Tensor weight;  // out x in
  Tensor bias;    // out x 1
};

struct ModelParams {
  Index half_dim = 0;
  FusionMode fusion = FusionMode::kAdditive;
  CoarseMode coarse = CoarseMode::kHeads;
  double tau_score = 1.0;
  LinearHead verb, object, coarse_verb, coarse_object;
  std::optional<LinearHead> composition;  // dedicated fusion only
  // Which composition is which primitive pair; fixed by the label space.
  std::vector<std::pair<Index, Index>> composition_parts;
  std::vector<Index> verb_parent, object_parent;

  Index num_compositions() const { return static_cast<Index>(composition_parts.size()); }

  // Named views of every trainable tensor, in a fixed order.
  std::vector<std::pair<std::string, const Tensor*>> tensors() const;
  std::vector<std::pair<std::string, Tensor*>> tensors();
  Bindings bindings() const;

  // Throws ModelError on inconsistent shapes or tau_score <= 0.
  void validate() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

ModelParams init_params(const LabelSpace& ls, const Hierarchy& h, Index half_dim, FusionMode mode,
                        std::uint64_t seed, CoarseMode coarse = CoarseMode::kHeads);

// Graph of one forward pass. Logits and scores are label x sample.
struct ModelGraph {
  std::array<Var, 5> logits;  // coarse entries are invalid under kMaxChildren
  ScoreNodes scores;
};

// `features` is K x 2d (one row per sample); parameters are added to `g`
// under the names reported by ModelParams::tensors().
ModelGraph build_forward(ExprGraph& g, const ModelParams& p, const Tensor& features);

ScoreTable forward(const ModelParams& p, const Tensor& features);

// argmax over `candidates` of z + bias * [seen]; ties go to the smallest
// composition index. Bias may be +-infinity.
std::vector<Index> predict_composition(const Tensor& composition_logits, std::span<const Index> candidates,
                                       const std::vector<bool>& seen, double bias_seen);

void write_checkpoint(const std::filesystem::path& path, const ModelParams& p);
ModelParams read_checkpoint(const std::filesystem::path& path);

}  // namespace logiccar

#endif  // LOGICCAR_SCORING_MODEL_HPP_

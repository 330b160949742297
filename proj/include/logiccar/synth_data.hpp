#ifndef LOGICCAR_SYNTH_DATA_HPP_
#define LOGICCAR_SYNTH_DATA_HPP_

// Synthetic compositional benchmark. Primitives live in a two-level prototype
// geometry; a sample of composition (v, o) is
//   [p_v + noise*N(0,I) | p_o + noise*N(0,I)]
// whose first half plays the role of dynamic (verb) evidence and the second
// half static (object) evidence.

#include "logiccar/hierarchy.hpp"
#include "logiccar/label_space.hpp"
#include "logiccar/rng.hpp"
#include "logiccar/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace logiccar {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  Index coarse_verbs = 3;
  Index verbs_per_coarse = 2;
  Index coarse_objects = 4;
  Index objects_per_coarse = 2;
  Index half_dim = 16;        // d; features have 2d entries
  double spread = 0.3;        // fine prototype offset scale within a cluster
  double noise = 0.5;         // per-sample Gaussian noise
  Index samples_per_composition = 20;       // training samples per seen composition
  Index eval_samples_per_composition = 10;  // per composition and evaluation split
  Index num_compositions = 40;
  double unseen_fraction = 0.3;
  double cooccurrence_bias = 0.6;  // rho
  std::uint64_t seed = 7;

  Index num_verbs() const { return coarse_verbs * verbs_per_coarse; }
  Index num_objects() const { return coarse_objects * objects_per_coarse; }
  Index num_unseen() const;
  Index num_seen() const { return num_compositions - num_unseen(); }

  // Throws DataError.
  void validate() const;
};

std::string dataset_spec_to_json(const DatasetSpec& spec);
// Unknown keys are rejected.
DatasetSpec dataset_spec_from_json(std::string_view text);

struct GeneratedLabels {
  LabelSpace labels;
  Hierarchy hierarchy;  // ground truth implied by the spec
};

// Verb names "vc<a> v<i>", object names "o<j>_oc<b>", coarse names "vc<a>" /
// "oc<b>". Compositions are sorted by (verb, object).
GeneratedLabels build_label_space(const DatasetSpec& spec);

// One draw of the biased pair sampler: verb uniform; with probability rho the
// object comes from the verb's correlated object family, else uniform.
std::pair<Index, Index> draw_composition_pair(Rng& rng, const DatasetSpec& spec);
Index correlated_object_family(const DatasetSpec& spec, Index verb);

enum class SampleSplit : std::uint8_t { kTrain, kVal, kTest };
std::string_view sample_split_name(SampleSplit s);

struct Dataset {
  Index half_dim = 0;
  Tensor features;  // one row per sample, 2*half_dim columns
  std::vector<Index> composition;
  std::vector<SampleSplit> split;

  Index size() const { return static_cast<Index>(composition.size()); }
  Dataset subset(SampleSplit s) const;

  friend bool operator==(const Dataset& a, const Dataset& b);
};

// Seen compositions contribute training samples and held-out val/test samples;
// unseen_val (unseen_test) compositions only contribute val (test) samples.
Dataset sample_dataset(const LabelSpace& ls, const DatasetSpec& spec);

struct Prototypes {
  Tensor verbs;    // |V| x d
  Tensor objects;  // |O| x d
};
Prototypes make_prototypes(const DatasetSpec& spec);

void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path, const LabelSpace& ls);

}  // namespace logiccar

#endif  // LOGICCAR_SYNTH_DATA_HPP_

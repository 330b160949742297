#ifndef LOGICCAR_RUN_CONFIG_HPP_
#define LOGICCAR_RUN_CONFIG_HPP_

// One JSON document for a run: dataset spec, training settings and paths.
// Unknown keys are rejected; `a.b value` overrides address any leaf.

#include "logiccar/synth_data.hpp"
#include "logiccar/trainer.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace logiccar {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  DatasetSpec data;
  TrainConfig train;
  std::string data_dir;   // empty: generate from `data`
  std::string hierarchy;  // empty: <data_dir>/hierarchy.json, or the generated ground truth
};

using Override = std::pair<std::string, std::string>;

// `text` may be empty (all defaults).
RunConfig load_run_config(std::string_view text, const std::vector<Override>& overrides = {});
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace logiccar

#endif  // LOGICCAR_RUN_CONFIG_HPP_

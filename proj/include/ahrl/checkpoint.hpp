#pragma once

// Textual (JSON) checkpoints. Field order:
//   format, version, kind, label, prior[5], behavior[], train_config{...},
//   actor{core{input_weights, recurrent_weights, bias}, head{weights, bias, activation}}
// Matrices are {rows, cols, data (row-major)}. Doubles round-trip exactly.

#include <string>

#include "ahrl/affinity.hpp"
#include "ahrl/ddpg.hpp"

namespace ahrl {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;   // "prototype" or "orchestrator"
  std::string label;  // trait name or customer id
  AffinityPrior prior{{0.2, 0.2, 0.2, 0.2, 0.2}};
  Vector behavior;    // orchestrator only; may be empty
  TrainConfig config;
  ActorNetwork actor;
};

std::string checkpoint_to_string(const Checkpoint& c);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ahrl

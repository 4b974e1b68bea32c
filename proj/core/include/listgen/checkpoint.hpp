#pragma once

#include <string>

#include "listgen/model.hpp"

namespace listgen {

// Checkpoint file: a plain-text manifest (hyperparameters, vocabulary seed,
// step count), a blank line, then each named parameter array as a
// "name count" line followed by count little-endian float32 values.
// save -> load -> save round-trips bit-exactly.
void save_checkpoint(const ScorerModel& model, int step_count, const std::string& path);

struct LoadedCheckpoint {
  ScorerModel model;
  int step_count = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace listgen

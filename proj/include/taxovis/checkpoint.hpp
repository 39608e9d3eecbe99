#pragma once

#include <cstdint>
#include <string>

#include "taxovis/params.hpp"

namespace taxovis {

// Everything needed to resume or evaluate a run: parameter values with their
// optimizer state, plus the (canonical-JSON) config and taxonomy dumps that
// produced them. Hashes let loaders refuse mismatched corpora cheaply.
struct Checkpoint {
  uint64_t config_hash = 0;
  uint64_t taxonomy_hash = 0;
  int iteration = 0;
  std::string config_json;
  std::string space_json;
  ParamStore store{0};
};

// Little-endian binary format with a magic header; save -> load -> save is
// byte-identical.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

uint64_t file_hash(const std::string& path);

}  // namespace taxovis

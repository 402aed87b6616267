#pragma once

#include <memory>
#include <string>

#include "ecgnn/model.hpp"

namespace ecgnn {

// ECGC checkpoint container:
//   magic "ECGC", version u32 (=1),
//   u64 config-JSON byte length + UTF-8 JSON (ModelConfig echo),
//   u32 parameter count,
//   per parameter: u32 name length, name bytes, ECGF version-2 record.
// Round-trips are bit-exact (64-bit payloads).

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const Model& model);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace ecgnn

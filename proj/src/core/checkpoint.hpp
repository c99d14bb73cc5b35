#pragma once

#include <map>
#include <string>

#include "core/layers.hpp"

namespace egs {

// Versioned checkpoint container: header, module name, parameter manifest
// (name/shape/dtype), raw little-endian float32 buffers in manifest order,
// then string metadata (epoch, optimizer, learning rate, frozen-model
// checksums, ...).
void save_checkpoint(const std::string& path, const std::string& module_name,
                     const ParamStore& params,
                     const std::map<std::string, std::string>& metadata);

// Loads into an already-constructed store; names and shapes must match the
// store exactly (architecture is code, weights are data).
std::map<std::string, std::string> load_checkpoint(const std::string& path,
                                                   const std::string& expected_module,
                                                   ParamStore& params);

// Reads just the metadata block.
std::map<std::string, std::string> read_checkpoint_metadata(const std::string& path);

}  // namespace egs

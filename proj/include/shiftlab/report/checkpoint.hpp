#pragma once

#include <cstdint>
#include <string>

#include "shiftlab/models/zoo.hpp"

namespace shiftlab {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "SHBC" container: format version, the ArchSpec, every parameter as a named
/// SHB1 blob, batch-norm running stats, and optionally the Adam moments so a
/// run can resume exactly. Written atomically (temp file + rename); a loaded
/// model reproduces forward outputs bit-exactly.
void save_checkpoint(const Model& model, const std::string& path,
                     bool include_optimizer = false);

Model load_checkpoint(const std::string& path);

/// Load that refuses a file whose stored ArchSpec differs from `expected`.
Model load_checkpoint(const std::string& path, const ArchSpec& expected);

}  // namespace shiftlab

#pragma once

namespace shiftlab {

/// Engine identifier stamped into report provenance blocks.
const char* engine_version();

}  // namespace shiftlab

#include "shiftlab/version.hpp"

namespace shiftlab {

const char* engine_version() { return "shiftlab 1.0.0"; }

}  // namespace shiftlab

#pragma once

#include <iosfwd>
#include <string>

#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

/// Raw tensor blob: magic "SHB1", uint32 ndims, uint32 dims, then the data as
/// little-endian 32-bit floats. Written atomically (temp file + rename).
void write_blob(const std::string& path, const Tensor<float>& tensor);

Tensor<float> read_blob(const std::string& path);

/// Same layout embedded in an open stream (used by checkpoint containers);
/// `context` names the stream in error messages.
void write_blob_stream(std::ostream& out, const Tensor<float>& tensor);

Tensor<float> read_blob_stream(std::istream& in, const std::string& context);

}  // namespace shiftlab

#pragma once

#include <string>

#include "attriflip/nn.hpp"

namespace attriflip {

// Binary checkpoint. Layout, all little-endian:
//   magic "ATTRIFLIP1"
//   u32 loss_kind (0 Euclidean, 1 softmax)
//   u32 input channels, height, width
//   u32 layer count, then per layer: u32 kind, i32 out_channels, kernel,
//     stride, pad, units
//   parameter arrays as IEEE-754 binary32, weights then biases, in layer
//   declaration order
//
// Parameters are stored in 32-bit precision; loading a freshly saved
// in-memory network reproduces it only to float precision.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace attriflip

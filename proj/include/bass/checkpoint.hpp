#pragma once

// Bit-exact model persistence. File layout:
//   magic "BASSCKPT" | version u32 | manifest-length u32 | UTF-8 manifest |
//   raw little-endian f32 payloads, in manifest order.
// The manifest carries "config <key> <value>" lines followed by one
// "<name> <d0>x<d1> f32 <offset>" line per parameter, offsets relative to
// the start of the payload section.

#include <string>

#include "bass/model.hpp"

namespace bass {

inline constexpr char kCheckpointMagic[8] = {'B', 'A', 'S', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Summarizer<float>& model);
Summarizer<float> load_checkpoint(const std::string& path);

}  // namespace bass

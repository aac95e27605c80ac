#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace fedsim {

// Wire layout (all integers little-endian):
//   magic    4 bytes  "FEDW"
//   version  1 byte   0x01
//   kind     1 byte
//   length   8 bytes  payload byte count, unsigned
//   payload  `length` bytes
//   checksum 4 bytes  CRC-32 of the payload
// An empty-payload frame is exactly 18 bytes.
inline constexpr std::uint8_t kFrameMagic[4] = {'F', 'E', 'D', 'W'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 14;    // magic + version + kind + length
inline constexpr std::size_t kFrameOverheadBytes = 18;  // header + checksum
inline constexpr std::uint64_t kMaxPayloadBytes = 256ull * 1024 * 1024;

enum class WireFault {
  bad_magic,
  bad_version,
  bad_checksum,
  truncated,
  bad_kind,
  too_large,
};

class WireError : public std::runtime_error {
 public:
  WireError(WireFault fault, const std::string& message)
      : std::runtime_error(message), fault(fault) {}

  WireFault fault;
};

struct RawFrame {
  std::uint8_t kind = 0;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> frame_encode(std::uint8_t kind, std::span<const std::uint8_t> payload);

// Requires exactly one complete frame.
RawFrame frame_decode(std::span<const std::uint8_t> bytes);

// Payload length promised by a frame header, for incremental socket reads.
std::uint64_t frame_payload_length(std::span<const std::uint8_t> header14);

}  // namespace fedsim

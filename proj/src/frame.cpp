#include "fedsim/frame.hpp"

#include <cstring>

#include "fedsim/wire.hpp"

namespace fedsim {

std::vector<std::uint8_t> frame_encode(std::uint8_t kind, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxPayloadBytes) {
    throw WireError(WireFault::too_large, "frame payload exceeds 256 MiB cap");
  }
  ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(kFrameMagic, 4));
  w.u8(kFrameVersion);
  w.u8(kind);
  w.u64(payload.size());
  w.bytes(payload);
  w.u32(crc32(payload));
  return w.take();
}

std::uint64_t frame_payload_length(std::span<const std::uint8_t> header14) {
  if (header14.size() < kFrameHeaderBytes) {
    throw WireError(WireFault::truncated, "frame header truncated");
  }
  if (std::memcmp(header14.data(), kFrameMagic, 4) != 0) {
    throw WireError(WireFault::bad_magic, "bad frame magic");
  }
  if (header14[4] != kFrameVersion) {
    throw WireError(WireFault::bad_version, "unsupported frame version");
  }
  std::uint64_t length = 0;
  for (int i = 0; i < 8; ++i) length |= static_cast<std::uint64_t>(header14[6 + i]) << (8 * i);
  if (length > kMaxPayloadBytes) {
    throw WireError(WireFault::too_large, "frame payload exceeds 256 MiB cap");
  }
  return length;
}

RawFrame frame_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameOverheadBytes) {
    throw WireError(WireFault::truncated, "frame shorter than header + checksum");
  }
  const std::uint64_t length = frame_payload_length(bytes.subspan(0, kFrameHeaderBytes));
  if (bytes.size() != kFrameOverheadBytes + length) {
    throw WireError(WireFault::truncated, "frame length field does not match input size");
  }
  RawFrame frame;
  frame.kind = bytes[5];
  frame.payload.assign(bytes.begin() + kFrameHeaderBytes,
                       bytes.begin() + kFrameHeaderBytes + static_cast<std::ptrdiff_t>(length));
  std::uint32_t stated = 0;
  for (int i = 0; i < 4; ++i) {
    stated |= static_cast<std::uint32_t>(bytes[kFrameHeaderBytes + length + i]) << (8 * i);
  }
  if (stated != crc32(frame.payload)) {
    throw WireError(WireFault::bad_checksum, "frame checksum mismatch");
  }
  return frame;
}

}  // namespace fedsim

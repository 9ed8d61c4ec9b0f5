#pragma once

// Trace input: classic pcap (UDP payloads) and the canonical JSON trace
// format, plus deduplication / truncation preprocessing.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemetyl/model.hpp"

namespace nemetyl {

struct Trace {
  std::string protocol_name;
  std::vector<Message> messages;

  std::size_t size() const noexcept { return messages.size(); }
  bool has_types() const {
    for (const auto& m : messages)
      if (!m.true_type()) return false;
    return !messages.empty();
  }
  bool has_boundaries() const {
    for (const auto& m : messages)
      if (!m.true_boundaries()) return false;
    return !messages.empty();
  }
};

namespace detail {

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

class ByteReader {
 public:
  ByteReader(ByteView data, bool big_endian) : data_(data), big_endian_(big_endian) {}

  std::uint32_t u32(std::size_t at) const {
    const Byte* p = data_.data() + at;
    if (big_endian_)
      return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3];
    return std::uint32_t(p[3]) << 24 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[1]) << 8 | p[0];
  }

 private:
  ByteView data_;
  bool big_endian_;
};

inline std::uint16_t be16(const Byte* p) { return static_cast<std::uint16_t>(p[0] << 8 | p[1]); }

}  // namespace detail

struct PcapStats {
  std::size_t records = 0;
  std::size_t fragments_skipped = 0;
  std::size_t truncated_skipped = 0;
};

constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::uint32_t kLinkRawIp = 101;
constexpr std::uint32_t kLinkRawIpAlt = 12;
constexpr std::uint32_t kLinkIpv4 = 228;

/// Extracts the UDP payload from one captured frame, or an empty result if
/// the frame is not an unfragmented IPv4/UDP datagram on `udp_port`.
inline std::optional<ByteView> udp_payload(ByteView frame, std::uint32_t link_type, int udp_port,
                                           PcapStats& stats) {
  std::size_t ip = 0;
  if (link_type == kLinkEthernet) {
    if (frame.size() < 14) return std::nullopt;
    std::uint16_t ethertype = detail::be16(frame.data() + 12);
    ip = 14;
    while (ethertype == 0x8100 || ethertype == 0x88a8) {  // VLAN tags
      if (frame.size() < ip + 4) return std::nullopt;
      ethertype = detail::be16(frame.data() + ip + 2);
      ip += 4;
    }
    if (ethertype != 0x0800) return std::nullopt;
  }
  if (frame.size() < ip + 20) return std::nullopt;
  const Byte* h = frame.data() + ip;
  if ((h[0] >> 4) != 4) return std::nullopt;
  std::size_t ihl = std::size_t(h[0] & 0x0f) * 4;
  if (ihl < 20 || frame.size() < ip + ihl) return std::nullopt;
  if (h[9] != 17) return std::nullopt;
  std::uint16_t frag = detail::be16(h + 6);
  if ((frag & 0x2000) != 0 || (frag & 0x1fff) != 0) {
    ++stats.fragments_skipped;
    return std::nullopt;
  }
  std::size_t total_len = detail::be16(h + 2);
  std::size_t udp = ip + ihl;
  if (frame.size() < udp + 8) return std::nullopt;
  const Byte* u = frame.data() + udp;
  int src = detail::be16(u), dst = detail::be16(u + 2);
  if (src != udp_port && dst != udp_port) return std::nullopt;
  std::size_t udp_len = detail::be16(u + 4);
  if (udp_len < 8) return std::nullopt;
  std::size_t payload_len = udp_len - 8;
  if (total_len >= ihl + 8) payload_len = std::min(payload_len, total_len - ihl - 8);
  if (frame.size() < udp + 8 + payload_len) {
    ++stats.truncated_skipped;
    return std::nullopt;
  }
  if (payload_len == 0) return std::nullopt;
  return frame.subspan(udp + 8, payload_len);
}

/// Reads UDP datagram payloads to/from `udp_port` from a classic pcap file.
inline Trace read_pcap(const std::filesystem::path& path, int udp_port, std::size_t max_messages,
                       PcapStats* stats_out = nullptr) {
  if (udp_port < 0 || udp_port > 65535)
    throw Error(ErrorKind::Contract, "udp port out of range: " + std::to_string(udp_port));
  Bytes file = detail::read_file(path);
  if (file.size() < 24) throw Error(ErrorKind::Format, path.string() + ": truncated pcap header");

  const std::uint32_t magic_le = detail::ByteReader(file, false).u32(0);
  bool big_endian;
  switch (magic_le) {
    case 0xa1b2c3d4: case 0xa1b23c4d: big_endian = false; break;
    case 0xd4c3b2a1: case 0x4d3cb2a1: big_endian = true; break;
    default:
      throw Error(ErrorKind::Format, path.string() + ": not a classic pcap file (bad magic)");
  }
  detail::ByteReader header(file, big_endian);
  const std::uint32_t link_type = header.u32(20) & 0x0fffffff;
  if (link_type != kLinkEthernet && link_type != kLinkRawIp && link_type != kLinkRawIpAlt &&
      link_type != kLinkIpv4)
    throw Error(ErrorKind::Unsupported,
                path.string() + ": unsupported link type " + std::to_string(link_type));

  PcapStats stats;
  Trace trace{path.stem().string(), {}};
  std::size_t pos = 24;
  while (pos + 16 <= file.size() && trace.messages.size() < max_messages) {
    const std::uint32_t incl_len = header.u32(pos + 8);
    pos += 16;
    if (pos + incl_len > file.size())
      throw Error(ErrorKind::Format, path.string() + ": truncated packet record");
    ++stats.records;
    ByteView frame(file.data() + pos, incl_len);
    pos += incl_len;
    if (auto payload = udp_payload(frame, link_type, udp_port, stats))
      trace.messages.emplace_back(trace.messages.size(), Bytes(payload->begin(), payload->end()));
  }
  if (stats_out) *stats_out = stats;
  if (trace.messages.empty())
    throw Error(ErrorKind::EmptyTrace,
                path.string() + ": no UDP datagrams on port " + std::to_string(udp_port));
  return trace;
}

inline Trace trace_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("messages") || !doc["messages"].is_array())
    throw Error(ErrorKind::Format, "trace JSON needs a top-level \"messages\" array");
  Trace trace;
  trace.protocol_name = doc.value("protocol", std::string("unknown"));
  for (const auto& entry : doc["messages"]) {
    if (!entry.is_object() || !entry.contains("data") || !entry["data"].is_string())
      throw Error(ErrorKind::Format, "message entry without \"data\" hex string");
    std::optional<std::string> type;
    if (entry.contains("type") && !entry["type"].is_null()) {
      if (!entry["type"].is_string()) throw Error(ErrorKind::Format, "\"type\" must be a string");
      type = entry["type"].get<std::string>();
    }
    std::optional<std::vector<std::size_t>> fields;
    if (entry.contains("fields") && !entry["fields"].is_null()) {
      if (!entry["fields"].is_array()) throw Error(ErrorKind::Format, "\"fields\" must be an array");
      std::vector<std::size_t> offsets;
      for (const auto& f : entry["fields"]) {
        if (!f.is_number_unsigned())
          throw Error(ErrorKind::Format, "\"fields\" must hold non-negative integers");
        offsets.push_back(f.get<std::size_t>());
      }
      fields = std::move(offsets);
    }
    trace.messages.emplace_back(trace.messages.size(), from_hex(entry["data"].get<std::string>()),
                                std::move(type), std::move(fields));
  }
  if (trace.messages.empty()) throw Error(ErrorKind::EmptyTrace, "trace JSON has no messages");
  return trace;
}

inline Trace read_trace_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  try {
    return trace_from_json(doc);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format || e.kind() == ErrorKind::EmptyTrace)
      throw Error(e.kind(), path.string() + ": " + e.what());
    throw;
  }
}

inline nlohmann::json trace_to_json(const Trace& trace) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : trace.messages) {
    nlohmann::json entry{{"data", to_hex(m.data())}};
    if (m.true_type()) entry["type"] = *m.true_type();
    if (m.true_boundaries()) entry["fields"] = *m.true_boundaries();
    messages.push_back(std::move(entry));
  }
  return {{"protocol", trace.protocol_name}, {"messages", std::move(messages)}};
}

/// Drops payload duplicates (first occurrence wins), keeps the first `limit`
/// messages and renumbers ids from 0.
inline Trace preprocess(const Trace& trace, std::size_t limit) {
  require(limit >= 1, "preprocess limit must be at least 1");
  Trace out{trace.protocol_name, {}};
  std::set<Bytes> seen;
  for (const auto& m : trace.messages) {
    if (out.messages.size() >= limit) break;
    if (!seen.emplace(m.data().begin(), m.data().end()).second) continue;
    out.messages.push_back(m.with_id(out.messages.size()));
  }
  if (out.messages.empty()) throw Error(ErrorKind::EmptyTrace, "no messages after preprocessing");
  return out;
}

}  // namespace nemetyl

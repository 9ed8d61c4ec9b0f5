#pragma once

// Message segmentation: fixed chunks, ground-truth boundaries, and the
// heuristic refinements applied on top of an existing segmentation.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemetyl/ingest.hpp"
#include "nemetyl/model.hpp"

namespace nemetyl {

/// Per-message segment lists, indexed by message id.
using Segmentation = std::vector<std::vector<Segment>>;

inline std::vector<Segment> segment_fixed(const Message& message, std::size_t chunk_len) {
  require(chunk_len >= 1, "chunk length must be at least 1");
  std::vector<Segment> out;
  for (std::size_t offset = 0; offset < message.size(); offset += chunk_len)
    out.push_back(slice(message, offset, std::min(chunk_len, message.size() - offset)));
  return out;
}

inline std::vector<Segment> segment_from_boundaries(const Message& message) {
  if (!message.true_boundaries())
    throw Error(ErrorKind::Precondition,
                "message " + std::to_string(message.id()) + " has no field boundaries");
  const auto& starts = *message.true_boundaries();
  std::vector<Segment> out;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    std::size_t end = i + 1 < starts.size() ? starts[i + 1] : message.size();
    out.push_back(slice(message, starts[i], end - starts[i]));
  }
  return out;
}

inline Segmentation segment_trace_fixed(const Trace& trace, std::size_t chunk_len) {
  Segmentation out;
  for (const auto& m : trace.messages) out.push_back(segment_fixed(m, chunk_len));
  return out;
}

inline Segmentation segment_trace_boundaries(const Trace& trace) {
  Segmentation out;
  for (const auto& m : trace.messages) out.push_back(segment_from_boundaries(m));
  return out;
}

/// Throws Contract unless every message is covered contiguously from offset 0.
inline void validate_segmentation(const Trace& trace, const Segmentation& segmentation) {
  require(segmentation.size() == trace.size(), "segmentation does not match trace size");
  for (std::size_t id = 0; id < trace.size(); ++id) {
    const auto& msg = trace.messages[id];
    std::size_t pos = 0;
    for (const auto& seg : segmentation[id]) {
      require(seg.message_id == id && seg.offset == pos && !seg.bytes.empty(),
              "segments of message " + std::to_string(id) + " are not contiguous");
      require(std::equal(seg.bytes.begin(), seg.bytes.end(), msg.data().begin() + pos) &&
                  seg.end() <= msg.size(),
              "segment bytes differ from message " + std::to_string(id));
      pos = seg.end();
    }
    require(pos == msg.size(), "segments do not cover message " + std::to_string(id));
  }
}

inline bool is_printable(Byte b) noexcept {
  return (b >= 0x20 && b <= 0x7e) || b == 0x09 || b == 0x0a || b == 0x0d;
}

/// Char-sequence heuristic: all bytes below char_byte_max, at least
/// char_min_len long, mean of non-zero bytes strictly inside
/// (char_mean_min, char_mean_max), and fewer than char_nonprintable_ratio of
/// bytes that are neither printable nor zero.
inline bool detect_char_sequence(ByteView bytes, const AnalysisConfig& cfg) {
  if (bytes.size() < cfg.char_min_len || bytes.empty()) return false;
  double sum = 0.0;
  std::size_t nonzero = 0, odd = 0;
  for (Byte b : bytes) {
    if (b >= cfg.char_byte_max) return false;
    if (b != 0) {
      sum += b;
      ++nonzero;
      if (!is_printable(b)) ++odd;
    }
  }
  if (nonzero == 0) return false;
  const double mean = sum / static_cast<double>(nonzero);
  if (!(mean > cfg.char_mean_min && mean < cfg.char_mean_max)) return false;
  return static_cast<double>(odd) / static_cast<double>(bytes.size()) < cfg.char_nonprintable_ratio;
}

/// Replaces the first segment of every message by one-byte segments.
inline Segmentation refine_first_segment_split(const Segmentation& segmentation) {
  Segmentation out;
  out.reserve(segmentation.size());
  for (const auto& segments : segmentation) {
    std::vector<Segment> refined;
    if (!segments.empty()) {
      const Segment& first = segments.front();
      for (std::size_t i = 0; i < first.size(); ++i)
        refined.push_back(Segment{first.message_id, first.offset + i, Bytes{first.bytes[i]}, false});
      refined.insert(refined.end(), segments.begin() + 1, segments.end());
    }
    out.push_back(std::move(refined));
  }
  return out;
}

/// The `top_k` most common segment values; ordered by descending count, then
/// shorter value, then lexicographically.
inline std::vector<Bytes> most_frequent_values(const Segmentation& segmentation, std::size_t top_k) {
  std::map<Bytes, std::size_t> counts;
  for (const auto& segments : segmentation)
    for (const auto& seg : segments) ++counts[seg.bytes];
  std::vector<std::pair<Bytes, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    if (a.first.size() != b.first.size()) return a.first.size() < b.first.size();
    return a.first < b.first;
  });
  std::vector<Bytes> out;
  for (std::size_t i = 0; i < ranked.size() && i < top_k; ++i) out.push_back(ranked[i].first);
  return out;
}

/// Splits segments that contain one of the trace's most frequent segment
/// values as a proper substring, exposing that value as its own segment.
/// One pass over the input; split pieces are not split again.
inline Segmentation refine_frequent_value_split(const Segmentation& segmentation, std::size_t top_k) {
  require(top_k >= 1, "top_k must be at least 1");
  const auto frequent = most_frequent_values(segmentation, top_k);
  Segmentation out;
  out.reserve(segmentation.size());
  for (const auto& segments : segmentation) {
    std::vector<Segment> refined;
    for (const auto& seg : segments) {
      bool split = false;
      for (const auto& value : frequent) {
        if (value.size() >= seg.size()) continue;
        auto hit = std::search(seg.bytes.begin(), seg.bytes.end(), value.begin(), value.end());
        if (hit == seg.bytes.end()) continue;
        const std::size_t start = static_cast<std::size_t>(hit - seg.bytes.begin());
        const std::size_t stop = start + value.size();
        auto piece = [&](std::size_t from, std::size_t to) {
          if (to > from)
            refined.push_back(Segment{seg.message_id, seg.offset + from,
                                      Bytes(seg.bytes.begin() + from, seg.bytes.begin() + to), false});
        };
        piece(0, start);
        piece(start, stop);
        piece(stop, seg.size());
        split = true;
        break;
      }
      if (!split) refined.push_back(seg);
    }
    out.push_back(std::move(refined));
  }
  return out;
}

/// Merges runs of adjacent segments whose concatenation is a char sequence and
/// flags char segments. From each start, the longest passing run is taken.
inline Segmentation refine_char_merge(const Segmentation& segmentation, const AnalysisConfig& cfg) {
  Segmentation out;
  out.reserve(segmentation.size());
  for (const auto& segments : segmentation) {
    std::vector<Segment> refined;
    std::size_t i = 0;
    while (i < segments.size()) {
      Bytes concat = segments[i].bytes;
      std::size_t best_end = i;  // inclusive
      Bytes best;
      for (std::size_t j = i + 1; j < segments.size(); ++j) {
        concat.insert(concat.end(), segments[j].bytes.begin(), segments[j].bytes.end());
        if (detect_char_sequence(concat, cfg)) {
          best_end = j;
          best = concat;
        }
      }
      if (best_end > i) {
        refined.push_back(Segment{segments[i].message_id, segments[i].offset, std::move(best), true});
        i = best_end + 1;
      } else {
        Segment seg = segments[i];
        seg.is_char = detect_char_sequence(seg.bytes, cfg);
        refined.push_back(std::move(seg));
        ++i;
      }
    }
    out.push_back(std::move(refined));
  }
  return out;
}

/// Flags char segments without changing boundaries.
inline Segmentation mark_char_segments(Segmentation segmentation, const AnalysisConfig& cfg) {
  for (auto& segments : segmentation)
    for (auto& seg : segments) seg.is_char = detect_char_sequence(seg.bytes, cfg);
  return segmentation;
}

/// Frequent-value split, char merge, then first-segment split.
inline Segmentation refine_heuristic(const Segmentation& base, const AnalysisConfig& cfg) {
  return refine_first_segment_split(
      refine_char_merge(refine_frequent_value_split(base, cfg.frequent_top_k), cfg));
}

// Serialized as offsets/lengths; bytes are re-sliced from the trace on load.

inline nlohmann::json segmentation_to_json(const Segmentation& segmentation) {
  nlohmann::json messages = nlohmann::json::array();
  for (std::size_t id = 0; id < segmentation.size(); ++id) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : segmentation[id])
      segs.push_back({{"offset", s.offset}, {"length", s.size()}, {"char", s.is_char}});
    messages.push_back({{"id", id}, {"segments", std::move(segs)}});
  }
  return {{"messages", std::move(messages)}};
}

inline Segmentation segmentation_from_json(const nlohmann::json& doc, const Trace& trace) {
  Segmentation out;
  try {
    const auto& messages = doc.at("messages");
    if (messages.size() != trace.size())
      throw Error(ErrorKind::Format, "segmentation covers " + std::to_string(messages.size()) +
                                         " messages, trace has " + std::to_string(trace.size()));
    for (std::size_t id = 0; id < messages.size(); ++id) {
      std::vector<Segment> segs;
      for (const auto& s : messages[id].at("segments")) {
        const auto offset = s.at("offset").get<std::size_t>();
        const auto length = s.at("length").get<std::size_t>();
        if (length == 0 || offset + length > trace.messages[id].size())
          throw Error(ErrorKind::Format, "segment out of range in message " + std::to_string(id));
        segs.push_back(slice(trace.messages[id], offset, length, s.value("char", false)));
      }
      out.push_back(std::move(segs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("segmentation JSON: ") + e.what());
  }
  try {
    validate_segmentation(trace, out);
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, e.what());
  }
  return out;
}

}  // namespace nemetyl

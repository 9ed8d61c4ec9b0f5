#pragma once

// Core domain types: messages, segments, feature vectors, analysis config.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nemetyl/error.hpp"

namespace nemetyl {

using Byte = std::uint8_t;
using Bytes = std::vector<Byte>;
using ByteView = std::span<const Byte>;
using MessageId = std::size_t;

inline std::string to_hex(ByteView bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (Byte b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

/// Decodes a hex string (either case). Throws Format on odd length or
/// non-hex characters.
inline Bytes from_hex(std::string_view text) {
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorKind::Format, "non-hex character '" + std::string(1, c) + "' in \"" +
                                       std::string(text) + "\"");
  };
  if (text.size() % 2 != 0)
    throw Error(ErrorKind::Format, "odd-length hex string \"" + std::string(text) + "\"");
  Bytes out(text.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<Byte>(nibble(text[2 * i]) << 4 | nibble(text[2 * i + 1]));
  return out;
}

/// One captured message payload with optional ground truth.
class Message {
 public:
  Message(MessageId id, Bytes data, std::optional<std::string> true_type = std::nullopt,
          std::optional<std::vector<std::size_t>> true_boundaries = std::nullopt)
      : id_(id),
        data_(std::move(data)),
        true_type_(std::move(true_type)),
        true_boundaries_(std::move(true_boundaries)) {
    if (data_.empty()) throw Error(ErrorKind::Format, "message " + std::to_string(id_) + " is empty");
    if (true_boundaries_) {
      const auto& b = *true_boundaries_;
      if (b.empty() || b.front() != 0)
        throw Error(ErrorKind::Format,
                    "message " + std::to_string(id_) + ": field offsets must start at 0");
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i] >= data_.size())
          throw Error(ErrorKind::Format, "message " + std::to_string(id_) + ": field offset " +
                                             std::to_string(b[i]) + " beyond message length " +
                                             std::to_string(data_.size()));
        if (i > 0 && b[i] <= b[i - 1])
          throw Error(ErrorKind::Format,
                      "message " + std::to_string(id_) + ": field offsets not strictly ascending");
      }
    }
  }

  MessageId id() const noexcept { return id_; }
  ByteView data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  const std::optional<std::string>& true_type() const noexcept { return true_type_; }
  const std::optional<std::vector<std::size_t>>& true_boundaries() const noexcept {
    return true_boundaries_;
  }

  Message with_id(MessageId id) const {
    Message copy = *this;
    copy.id_ = id;
    return copy;
  }

 private:
  MessageId id_;
  Bytes data_;
  std::optional<std::string> true_type_;
  std::optional<std::vector<std::size_t>> true_boundaries_;
};

/// A contiguous slice of a message.
struct Segment {
  MessageId message_id = 0;
  std::size_t offset = 0;
  Bytes bytes;
  bool is_char = false;

  std::size_t size() const noexcept { return bytes.size(); }
  std::size_t end() const noexcept { return offset + bytes.size(); }

  friend bool operator==(const Segment&, const Segment&) = default;
};

inline Segment slice(const Message& message, std::size_t offset, std::size_t length,
                     bool is_char = false) {
  require(length >= 1 && offset + length <= message.size(), "segment slice out of range");
  auto data = message.data().subspan(offset, length);
  return Segment{message.id(), offset, Bytes(data.begin(), data.end()), is_char};
}

/// Segment bytes read as an unsigned numeric vector.
class FeatureVector {
 public:
  explicit FeatureVector(ByteView bytes) : components_(bytes.begin(), bytes.end()) {}
  explicit FeatureVector(const Segment& segment) : FeatureVector(ByteView(segment.bytes)) {}

  std::span<const double> components() const noexcept { return components_; }
  std::size_t dim() const noexcept { return components_.size(); }
  double operator[](std::size_t i) const { return components_[i]; }

 private:
  std::vector<double> components_;
};

struct AnalysisConfig {
  double penalty_f = 0.33;      // non-linear length penalty of the mixed Canberra dissimilarity
  double gap_penalty = -1.0;    // alignment gap score
  double match_bound = 1.0;     // maximum segment similarity
  double mismatch_bound = 0.0;  // minimum segment similarity
  int min_samples = 3;
  double epsilon_factor = 1.0;

  double char_mean_min = 50.0;
  double char_mean_max = 115.0;
  std::size_t char_min_len = 6;
  double char_nonprintable_ratio = 0.33;
  int char_byte_max = 0x7f;  // exclusive

  std::size_t trace_limit = 1000;
  std::size_t frequent_top_k = 3;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, what); };
    if (!(penalty_f >= 0.0 && penalty_f < 1.0)) fail("penalty_f must lie in [0, 1)");
    if (!(gap_penalty < 0.0)) fail("gap_penalty must be negative");
    if (min_samples < 2) fail("min_samples must be at least 2");
    if (!(epsilon_factor > 0.0 && epsilon_factor <= 1.0)) fail("epsilon_factor must lie in (0, 1]");
    if (trace_limit < 1) fail("trace_limit must be at least 1");
    if (frequent_top_k < 1) fail("frequent_top_k must be at least 1");
  }
};

}  // namespace nemetyl

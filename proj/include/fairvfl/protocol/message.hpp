#pragma once

#include "fairvfl/nn/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fairvfl::protocol {

enum class Role { Task, Server, Insensitive, Sensitive };

struct PlatformId {
  Role role = Role::Task;
  std::size_t index = 0;  // meaningful for Insensitive and Sensitive only

  static PlatformId task() { return {Role::Task, 0}; }
  static PlatformId server() { return {Role::Server, 0}; }
  static PlatformId insensitive(std::size_t i) { return {Role::Insensitive, i}; }
  static PlatformId sensitive(std::size_t i) { return {Role::Sensitive, i}; }

  auto operator<=>(const PlatformId&) const = default;
};

// "P^t", "P^w", "P^b_<i>", "P^a_<i>".
std::string to_string(const PlatformId& p);
PlatformId parse_platform(const std::string& s);

enum class PayloadKind {
  SampleIds,
  LocalRepUpload,
  UnifiedRepToTask,
  TaskGradDown,
  ProtectedRepUpload,
  BiasDiscGradDown,
  AdvGradDown,
  LocalRepGradDown,
  // Never produced by the protocol; they exist so raw data crossing a
  // platform boundary can be represented and audited.
  RawFeatures,
  SensitiveLabels,
  TaskLabels,
};

const char* to_string(PayloadKind kind);
PayloadKind parse_payload_kind(const std::string& s);

// Whether (sender -> receiver) may carry this kind in a correct run.
bool edge_is_legal(PayloadKind kind, const PlatformId& sender, const PlatformId& receiver);

// ProtectedRepUpload, BiasDiscGradDown, AdvGradDown.
bool is_fairness_traffic(PayloadKind kind);

struct Message {
  std::uint64_t round = 0;
  PlatformId sender;
  PlatformId receiver;
  PayloadKind kind = PayloadKind::SampleIds;
  nn::Tensor2D tensor;              // empty for SampleIds
  std::vector<std::uint64_t> ids;   // SampleIds only
  bool perturbed = false;

  std::size_t float_count() const;
  std::vector<std::int64_t> shape() const;
  std::uint64_t digest() const;
};

/// Metadata of one delivered message. Payloads are not retained; the digest
/// allows bitwise comparison across runs.
struct TranscriptRecord {
  std::uint64_t round = 0;
  PlatformId sender;
  PlatformId receiver;
  PayloadKind kind = PayloadKind::SampleIds;
  std::vector<std::int64_t> shape;
  std::size_t float_count = 0;
  std::uint64_t payload_digest = 0;
  bool perturbed = false;

  static TranscriptRecord of(const Message& m);
  nlohmann::json to_json() const;
  static TranscriptRecord from_json(const nlohmann::json& j);
  bool operator==(const TranscriptRecord&) const = default;
};

/// Append-only log of every message sent in a run.
class Transcript {
 public:
  void append(TranscriptRecord r) { records_.push_back(std::move(r)); }
  const std::vector<TranscriptRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  void clear() { records_.clear(); }

  // One JSON object per line.
  std::string to_ndjson() const;
  void write(const std::filesystem::path& path) const;
  // Parse errors carry the 1-based line number.
  static Transcript from_ndjson(const std::string& text);
  static Transcript read(const std::filesystem::path& path);

  bool operator==(const Transcript&) const = default;

 private:
  std::vector<TranscriptRecord> records_;
};

/// Delivers messages between actors in FIFO order per receiver, logging each
/// one. Messages on illegal edges are logged and then rejected.
class Bus {
 public:
  explicit Bus(Transcript& transcript) : transcript_(&transcript) {}

  void send(Message m);
  // Pops the oldest message for receiver; it must have the expected kind and
  // sender.
  Message receive(const PlatformId& receiver, PayloadKind kind, const PlatformId& sender);
  bool idle() const;

 private:
  Transcript* transcript_;
  std::map<PlatformId, std::deque<Message>> mailboxes_;
};

}  // namespace fairvfl::protocol

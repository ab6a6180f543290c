#pragma once

#include "fairvfl/protocol/message.hpp"
#include "fairvfl/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace fairvfl::protocol {

struct LdpConfig {
  double clip = 1.0;
  double epsilon = 8.0;
  bool enabled = false;
  bool perturb_training = true;  // also perturb s on training uploads

  void validate() const;
  nlohmann::json to_json() const;
  static LdpConfig from_json(const nlohmann::json& j);
  bool operator==(const LdpConfig&) const = default;
};

// Clip each coordinate to [-clip, clip], then add Laplace(2 clip / epsilon).
nn::Tensor2D ldp_perturb(const nn::Tensor2D& s, const LdpConfig& cfg, Rng& rng);

enum class ViolationKind {
  RawFeatureDisclosure,   // raw feature payload crossing platforms
  LocalRepLeak,           // s^l reaching anyone but the server
  UnperturbedUnified,     // unperturbed s reaching P^t while LDP is on
  UnifiedToSensitive,     // s (not a_i) reaching a sensitive platform
  SensitiveLabelLeak,     // sensitive labels leaving P^a_i
  IllegalEdge,            // any other kind/edge combination outside the table
};

const char* to_string(ViolationKind kind);

struct AuditPolicy {
  bool ldp_enabled = false;
};

struct Violation {
  std::size_t record_index = 0;
  ViolationKind kind = ViolationKind::IllegalEdge;
  std::string detail;
};

// At most one violation per record, the most specific category first.
std::vector<Violation> audit_transcript(const Transcript& t, const AuditPolicy& policy);

// Floats in ProtectedRepUpload, BiasDiscGradDown and AdvGradDown messages.
std::size_t fairness_comm_cost(const Transcript& t);

struct RoundTraffic {
  std::size_t batch = 0;            // ids sent to the first insensitive platform
  std::size_t fairness_floats = 0;
  std::size_t total_floats = 0;
};

// Training rounds only (rounds that carry a TaskGradDown).
std::map<std::uint64_t, RoundTraffic> per_round_traffic(const Transcript& t);

// 4 * E * sum_i H_i.
std::size_t expected_fairness_traffic(std::size_t batch, const std::vector<std::size_t>& protected_widths);

}  // namespace fairvfl::protocol

#include "fairvfl/protocol/audit.hpp"

#include "fairvfl/error.hpp"

#include <cmath>

namespace fairvfl::protocol {

void LdpConfig::validate() const {
  if (!(clip > 0.0) || !std::isfinite(clip)) throw Error(ErrorKind::Config, "LDP clip bound must be > 0");
  if (enabled && !(epsilon > 0.0)) throw Error(ErrorKind::Config, "LDP epsilon must be > 0");
}

nlohmann::json LdpConfig::to_json() const {
  return {{"clip", clip}, {"epsilon", epsilon}, {"enabled", enabled}, {"perturb_training", perturb_training}};
}

LdpConfig LdpConfig::from_json(const nlohmann::json& j) {
  LdpConfig c;
  try {
    c.clip = j.value("clip", c.clip);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.enabled = j.value("enabled", c.enabled);
    c.perturb_training = j.value("perturb_training", c.perturb_training);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("ldp: ") + e.what());
  }
  return c;
}

nn::Tensor2D ldp_perturb(const nn::Tensor2D& s, const LdpConfig& cfg, Rng& rng) {
  if (!(cfg.epsilon > 0.0)) throw Error(ErrorKind::Config, "LDP epsilon must be > 0");
  if (!(cfg.clip > 0.0)) throw Error(ErrorKind::Config, "LDP clip bound must be > 0");
  const double scale = 2.0 * cfg.clip / cfg.epsilon;
  nn::Tensor2D out = s.cwiseMax(-cfg.clip).cwiseMin(cfg.clip);
  for (nn::Index k = 0; k < out.size(); ++k) out.data()[k] += rng.laplace(scale);
  return out;
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::RawFeatureDisclosure: return "raw_feature_disclosure";
    case ViolationKind::LocalRepLeak: return "local_rep_leak";
    case ViolationKind::UnperturbedUnified: return "unperturbed_unified";
    case ViolationKind::UnifiedToSensitive: return "unified_to_sensitive";
    case ViolationKind::SensitiveLabelLeak: return "sensitive_label_leak";
    case ViolationKind::IllegalEdge: return "illegal_edge";
  }
  return "?";
}

std::vector<Violation> audit_transcript(const Transcript& t, const AuditPolicy& policy) {
  std::vector<Violation> out;
  const auto& records = t.records();
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    const std::string edge = to_string(r.sender) + " -> " + to_string(r.receiver);
    const bool crosses = r.sender != r.receiver;
    auto flag = [&](ViolationKind v, const std::string& what) { out.push_back({k, v, what + " on " + edge}); };
    if (r.kind == PayloadKind::RawFeatures && crosses) {
      flag(ViolationKind::RawFeatureDisclosure, "raw features");
    } else if (r.kind == PayloadKind::LocalRepUpload && r.receiver.role != Role::Server) {
      flag(ViolationKind::LocalRepLeak, "local representation");
    } else if (r.kind == PayloadKind::UnifiedRepToTask && r.receiver.role == Role::Sensitive) {
      flag(ViolationKind::UnifiedToSensitive, "unified representation");
    } else if (r.kind == PayloadKind::UnifiedRepToTask && r.receiver.role == Role::Task && policy.ldp_enabled &&
               !r.perturbed) {
      flag(ViolationKind::UnperturbedUnified, "unperturbed unified representation");
    } else if (r.kind == PayloadKind::SensitiveLabels && r.sender.role == Role::Sensitive && crosses) {
      flag(ViolationKind::SensitiveLabelLeak, "sensitive labels");
    } else if (!edge_is_legal(r.kind, r.sender, r.receiver)) {
      flag(ViolationKind::IllegalEdge, std::string(to_string(r.kind)));
    }
  }
  return out;
}

std::size_t fairness_comm_cost(const Transcript& t) {
  std::size_t total = 0;
  for (const auto& r : t.records()) {
    if (is_fairness_traffic(r.kind)) total += r.float_count;
  }
  return total;
}

std::map<std::uint64_t, RoundTraffic> per_round_traffic(const Transcript& t) {
  std::map<std::uint64_t, RoundTraffic> all;
  std::map<std::uint64_t, bool> training;
  for (const auto& r : t.records()) {
    auto& rt = all[r.round];
    rt.total_floats += r.float_count;
    if (is_fairness_traffic(r.kind)) rt.fairness_floats += r.float_count;
    if (r.kind == PayloadKind::SampleIds && r.receiver == PlatformId::insensitive(0)) rt.batch = r.float_count;
    if (r.kind == PayloadKind::TaskGradDown) training[r.round] = true;
  }
  std::map<std::uint64_t, RoundTraffic> out;
  for (const auto& [round, rt] : all) {
    if (training.count(round)) out.emplace(round, rt);
  }
  return out;
}

std::size_t expected_fairness_traffic(std::size_t batch, const std::vector<std::size_t>& protected_widths) {
  std::size_t h = 0;
  for (auto w : protected_widths) h += w;
  return 4 * batch * h;
}

}  // namespace fairvfl::protocol

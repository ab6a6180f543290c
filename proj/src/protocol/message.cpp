#include "fairvfl/protocol/message.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/rng.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fairvfl::protocol {

std::string to_string(const PlatformId& p) {
  switch (p.role) {
    case Role::Task: return "P^t";
    case Role::Server: return "P^w";
    case Role::Insensitive: return "P^b_" + std::to_string(p.index);
    case Role::Sensitive: return "P^a_" + std::to_string(p.index);
  }
  return "?";
}

PlatformId parse_platform(const std::string& s) {
  if (s == "P^t") return PlatformId::task();
  if (s == "P^w") return PlatformId::server();
  auto indexed = [&](const std::string& prefix) -> std::optional<std::size_t> {
    if (s.rfind(prefix, 0) != 0 || s.size() == prefix.size()) return std::nullopt;
    std::size_t v = 0;
    for (std::size_t k = prefix.size(); k < s.size(); ++k) {
      if (s[k] < '0' || s[k] > '9') return std::nullopt;
      v = v * 10 + static_cast<std::size_t>(s[k] - '0');
    }
    return v;
  };
  if (auto i = indexed("P^b_")) return PlatformId::insensitive(*i);
  if (auto i = indexed("P^a_")) return PlatformId::sensitive(*i);
  throw Error(ErrorKind::Parse, "unknown platform '" + s + "'");
}

namespace {

constexpr std::array<std::pair<PayloadKind, const char*>, 11> kKindNames{{
    {PayloadKind::SampleIds, "SampleIds"},
    {PayloadKind::LocalRepUpload, "LocalRepUpload"},
    {PayloadKind::UnifiedRepToTask, "UnifiedRepToTask"},
    {PayloadKind::TaskGradDown, "TaskGradDown"},
    {PayloadKind::ProtectedRepUpload, "ProtectedRepUpload"},
    {PayloadKind::BiasDiscGradDown, "BiasDiscGradDown"},
    {PayloadKind::AdvGradDown, "AdvGradDown"},
    {PayloadKind::LocalRepGradDown, "LocalRepGradDown"},
    {PayloadKind::RawFeatures, "RawFeatures"},
    {PayloadKind::SensitiveLabels, "SensitiveLabels"},
    {PayloadKind::TaskLabels, "TaskLabels"},
}};

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 18 || s[0] != '0' || s[1] != 'x') throw Error(ErrorKind::Parse, "bad digest '" + s + "'");
  std::uint64_t v = 0;
  for (std::size_t k = 2; k < s.size(); ++k) {
    const char c = s[k];
    int d = 0;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else throw Error(ErrorKind::Parse, "bad digest '" + s + "'");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

}  // namespace

const char* to_string(PayloadKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

PayloadKind parse_payload_kind(const std::string& s) {
  for (const auto& [k, name] : kKindNames) {
    if (s == name) return k;
  }
  throw Error(ErrorKind::Parse, "unknown payload kind '" + s + "'");
}

bool edge_is_legal(PayloadKind kind, const PlatformId& sender, const PlatformId& receiver) {
  const Role s = sender.role;
  const Role r = receiver.role;
  const bool same_index = sender.index == receiver.index;
  switch (kind) {
    case PayloadKind::SampleIds:
      return s == Role::Task && (r == Role::Insensitive || r == Role::Sensitive);
    case PayloadKind::LocalRepUpload:
      return s == Role::Insensitive && r == Role::Server;
    case PayloadKind::UnifiedRepToTask:
      return s == Role::Server && r == Role::Task;
    case PayloadKind::TaskGradDown:
      return s == Role::Task && r == Role::Server;
    case PayloadKind::ProtectedRepUpload:
      return s == Role::Server && r == Role::Sensitive;
    case PayloadKind::BiasDiscGradDown:
    case PayloadKind::AdvGradDown:
      return s == Role::Sensitive && r == Role::Server;
    case PayloadKind::LocalRepGradDown:
      return s == Role::Server && r == Role::Insensitive;
    case PayloadKind::RawFeatures:
    case PayloadKind::SensitiveLabels:
    case PayloadKind::TaskLabels:
      return s == r && same_index;
  }
  return false;
}

bool is_fairness_traffic(PayloadKind kind) {
  return kind == PayloadKind::ProtectedRepUpload || kind == PayloadKind::BiasDiscGradDown ||
         kind == PayloadKind::AdvGradDown;
}

std::size_t Message::float_count() const {
  return kind == PayloadKind::SampleIds ? ids.size() : static_cast<std::size_t>(tensor.size());
}

std::vector<std::int64_t> Message::shape() const {
  if (kind == PayloadKind::SampleIds) return {static_cast<std::int64_t>(ids.size())};
  return {static_cast<std::int64_t>(tensor.rows()), static_cast<std::int64_t>(tensor.cols())};
}

std::uint64_t Message::digest() const {
  if (kind == PayloadKind::SampleIds) {
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(ids.data()), ids.size() * sizeof(std::uint64_t)));
  }
  return nn::payload_digest(tensor);
}

TranscriptRecord TranscriptRecord::of(const Message& m) {
  return {m.round, m.sender, m.receiver, m.kind, m.shape(), m.float_count(), m.digest(), m.perturbed};
}

nlohmann::json TranscriptRecord::to_json() const {
  return {{"round", round},
          {"sender", to_string(sender)},
          {"receiver", to_string(receiver)},
          {"kind", to_string(kind)},
          {"shape", shape},
          {"float_count", float_count},
          {"payload_digest", hex64(payload_digest)},
          {"perturbed", perturbed}};
}

TranscriptRecord TranscriptRecord::from_json(const nlohmann::json& j) {
  TranscriptRecord r;
  try {
    r.round = j.at("round").get<std::uint64_t>();
    r.sender = parse_platform(j.at("sender").get<std::string>());
    r.receiver = parse_platform(j.at("receiver").get<std::string>());
    r.kind = parse_payload_kind(j.at("kind").get<std::string>());
    r.shape = j.at("shape").get<std::vector<std::int64_t>>();
    r.float_count = j.at("float_count").get<std::size_t>();
    r.payload_digest = parse_hex64(j.at("payload_digest").get<std::string>());
    r.perturbed = j.value("perturbed", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  std::int64_t product = 1;
  for (auto d : r.shape) {
    if (d < 0) throw Error(ErrorKind::Parse, "negative dimension in shape");
    product *= d;
  }
  if (static_cast<std::size_t>(product) != r.float_count) {
    throw Error(ErrorKind::Parse, "float_count " + std::to_string(r.float_count) + " disagrees with shape");
  }
  return r;
}

std::string Transcript::to_ndjson() const {
  std::string out;
  for (const auto& r : records_) {
    out += r.to_json().dump();
    out += '\n';
  }
  return out;
}

void Transcript::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write transcript " + path.string());
  for (const auto& r : records_) out << r.to_json().dump() << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing transcript " + path.string());
}

Transcript Transcript::from_ndjson(const std::string& text) {
  Transcript t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw Error(ErrorKind::Parse, "record is not an object");
      t.append(TranscriptRecord::from_json(j));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Parse, "transcript line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, "transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

Transcript Transcript::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open transcript " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_ndjson(ss.str());
}

void Bus::send(Message m) {
  transcript_->append(TranscriptRecord::of(m));
  if (!edge_is_legal(m.kind, m.sender, m.receiver)) {
    throw ProtocolViolation(std::string(to_string(m.kind)) + " is not permitted on " + to_string(m.sender) + " -> " +
                            to_string(m.receiver));
  }
  mailboxes_[m.receiver].push_back(std::move(m));
}

Message Bus::receive(const PlatformId& receiver, PayloadKind kind, const PlatformId& sender) {
  auto it = mailboxes_.find(receiver);
  if (it == mailboxes_.end() || it->second.empty()) {
    throw ProtocolViolation(to_string(receiver) + " expected " + to_string(kind) + " but its mailbox is empty");
  }
  Message m = std::move(it->second.front());
  it->second.pop_front();
  if (m.kind != kind || m.sender != sender) {
    throw ProtocolViolation(to_string(receiver) + " expected " + to_string(kind) + " from " + to_string(sender) +
                            ", got " + to_string(m.kind) + " from " + to_string(m.sender));
  }
  return m;
}

bool Bus::idle() const {
  for (const auto& [_, q] : mailboxes_) {
    if (!q.empty()) return false;
  }
  return true;
}

}  // namespace fairvfl::protocol

#include "fairvfl/models/bundle.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/rng.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace fairvfl::models {

ModelBundle ModelBundle::create(const BundleLayout& layout, const RepWidths& widths, const ArchConfig& arch,
                                std::uint64_t seed) {
  widths.validate();
  arch.validate(widths);
  if (layout.platform_schemas.empty()) throw Error(ErrorKind::Config, "at least one insensitive platform is required");
  if (layout.sensitive_classes.size() != widths.protected_widths.size()) {
    throw Error(ErrorKind::Config, std::to_string(layout.sensitive_classes.size()) + " sensitive features but " +
                                       std::to_string(widths.protected_widths.size()) + " protected widths");
  }
  ModelBundle b;
  b.widths = widths;
  b.arch = arch;
  for (std::size_t p = 0; p < layout.platform_schemas.size(); ++p) {
    auto rng = Rng::stream(seed, "init/encoder/" + std::to_string(p));
    b.encoders.emplace_back(p, layout.platform_schemas[p], widths, arch, rng);
  }
  {
    auto rng = Rng::stream(seed, "init/aggregator");
    b.aggregator = Aggregator(layout.platform_schemas.size(), widths, arch, rng);
  }
  {
    auto rng = Rng::stream(seed, "init/task_head");
    b.task_head = TaskHead(widths, arch, layout.task_classes, rng);
  }
  for (std::size_t i = 0; i < layout.sensitive_classes.size(); ++i) {
    auto rm = Rng::stream(seed, "init/mapper/" + std::to_string(i));
    b.mappers.emplace_back(i, widths, arch, rm);
    auto rc = Rng::stream(seed, "init/contrastive/" + std::to_string(i));
    b.contrastive.emplace_back(i, widths, arch, rc);
    auto ra = Rng::stream(seed, "init/bias/" + std::to_string(i));
    b.bias.emplace_back(i, widths, arch, layout.sensitive_classes[i], ra);
  }
  return b;
}

nn::BlockList ModelBundle::blocks() {
  nn::BlockList out;
  auto append = [&](nn::BlockList more) { out.insert(out.end(), more.begin(), more.end()); };
  for (auto& e : encoders) append(e.blocks());
  append(aggregator.blocks());
  append(task_head.blocks());
  for (auto& m : mappers) append(m.blocks());
  for (auto& c : contrastive) append(c.blocks());
  for (auto& a : bias) append(a.blocks());
  return out;
}

nn::ConstBlockList ModelBundle::blocks() const {
  return nn::as_const(const_cast<ModelBundle*>(this)->blocks());
}

nn::Tensor2D map_protected(const ModelBundle& bundle, const nn::Tensor2D& unified, std::size_t feature) {
  if (feature >= bundle.mappers.size()) {
    throw Error(ErrorKind::Config, "sensitive feature index " + std::to_string(feature) + " out of range (m = " +
                                       std::to_string(bundle.mappers.size()) + ")");
  }
  return bundle.mappers[feature].forward(unified);
}

namespace {

constexpr char kMagic[8] = {'F', 'V', 'F', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& in, const std::string& what) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(ErrorKind::Checkpoint, "truncated while reading " + what);
  return v;
}

void read_doubles(std::istream& in, double* dst, std::size_t count, const std::string& what) {
  if (count > 0 && !in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(double)))) {
    throw Error(ErrorKind::Checkpoint, "truncated values for " + what);
  }
}

RepWidths read_header(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorKind::Checkpoint, "not a checkpoint file (bad magic)");
  }
  std::uint32_t version = 0;
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version) || version != kVersion) {
    throw Error(ErrorKind::Checkpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  RepWidths w;
  w.unified = read_u64(in, "unified width");
  const auto m = read_u64(in, "sensitive count");
  if (m > 1024) throw Error(ErrorKind::Checkpoint, "implausible sensitive count " + std::to_string(m));
  w.protected_widths.resize(m);
  for (auto& h : w.protected_widths) h = read_u64(in, "protected width");
  return w;
}

}  // namespace

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  write_u64(out, bundle.widths.unified);
  write_u64(out, bundle.widths.protected_widths.size());
  for (auto h : bundle.widths.protected_widths) write_u64(out, h);
  const auto blocks = bundle.blocks();
  write_u64(out, blocks.size());
  for (const auto* b : blocks) {
    write_u64(out, b->name.size());
    out.write(b->name.data(), static_cast<std::streamsize>(b->name.size()));
    write_u64(out, static_cast<std::uint64_t>(b->weights.rows()));
    write_u64(out, static_cast<std::uint64_t>(b->weights.cols()));
    write_u64(out, static_cast<std::uint64_t>(b->bias.size()));
    out.write(reinterpret_cast<const char*>(b->weights.data()),
              static_cast<std::streamsize>(b->weights.size() * static_cast<nn::Index>(sizeof(double))));
    out.write(reinterpret_cast<const char*>(b->bias.data()),
              static_cast<std::streamsize>(b->bias.size() * static_cast<nn::Index>(sizeof(double))));
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

RepWidths read_checkpoint_widths(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  return read_header(in);
}

void load_checkpoint(ModelBundle& bundle, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  const RepWidths widths = read_header(in);
  if (!(widths == bundle.widths)) {
    throw Error(ErrorKind::Checkpoint, "checkpoint widths " + widths.to_json().dump() +
                                           " do not match the configured widths " + bundle.widths.to_json().dump());
  }
  auto blocks = bundle.blocks();
  const auto count = read_u64(in, "block count");
  if (count != blocks.size()) {
    throw Error(ErrorKind::Checkpoint, "checkpoint holds " + std::to_string(count) + " blocks, model has " +
                                           std::to_string(blocks.size()));
  }
  for (auto* b : blocks) {
    const auto len = read_u64(in, "block name length");
    if (len > 4096) throw Error(ErrorKind::Checkpoint, "implausible block name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw Error(ErrorKind::Checkpoint, "truncated block name");
    if (name != b->name) throw Error(ErrorKind::Checkpoint, "expected block '" + b->name + "', found '" + name + "'");
    const auto rows = read_u64(in, name + " rows");
    const auto cols = read_u64(in, name + " cols");
    const auto bias = read_u64(in, name + " bias length");
    if (rows != static_cast<std::uint64_t>(b->weights.rows()) || cols != static_cast<std::uint64_t>(b->weights.cols()) ||
        bias != static_cast<std::uint64_t>(b->bias.size())) {
      throw Error(ErrorKind::Checkpoint, "block '" + name + "' shape [" + std::to_string(rows) + "x" +
                                             std::to_string(cols) + "] does not match " + nn::shape_string(b->weights));
    }
    read_doubles(in, b->weights.data(), static_cast<std::size_t>(b->weights.size()), name);
    read_doubles(in, b->bias.data(), static_cast<std::size_t>(b->bias.size()), name);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::Checkpoint, "trailing bytes after last block");
}

std::uint64_t bundle_digest(const ModelBundle& bundle) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto* b : bundle.blocks()) {
    h = fnv1a64(b->name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(b->weights.data()),
                                 static_cast<std::size_t>(b->weights.size()) * sizeof(double)),
                h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(b->bias.data()),
                                 static_cast<std::size_t>(b->bias.size()) * sizeof(double)),
                h);
  }
  return h;
}

}  // namespace fairvfl::models

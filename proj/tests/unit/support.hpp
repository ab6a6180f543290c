#pragma once

// Shared fixtures for the unit tests.

#include "fairvfl/data/partition.hpp"
#include "fairvfl/data/synthetic.hpp"
#include "fairvfl/models/bundle.hpp"
#include "fairvfl/nn/finite_difference.hpp"
#include "fairvfl/nn/param.hpp"
#include "fairvfl/protocol/federation.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>

namespace fvt {

using fairvfl::nn::Tensor2D;

inline Tensor2D random_tensor(fairvfl::Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Tensor2D t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-scale, scale);
  return t;
}

inline std::vector<int> random_labels(fairvfl::Rng& rng, std::size_t n, int classes) {
  std::vector<int> out(n);
  for (auto& y : out) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return out;
}

// Relative error of analytic parameter gradients against central differences.
// `loss` evaluates with the current parameters; `backward` zeroes and fills the
// gradient accumulators of `blocks`.
inline double param_grad_error(const fairvfl::nn::BlockList& blocks, const std::function<double()>& loss,
                               const std::function<void()>& backward, double h = 1e-6, double floor = 1e-6) {
  using namespace fairvfl::nn;
  zero_grads(blocks);
  backward();
  const Eigen::VectorXd analytic = flatten_grads(as_const(blocks));
  const Eigen::VectorXd x0 = flatten_params(as_const(blocks));
  const Eigen::VectorXd numeric = finite_difference_gradient(
      [&](const Eigen::VectorXd& x) {
        unflatten_params(blocks, x);
        return loss();
      },
      x0, h);
  unflatten_params(blocks, x0);
  return compare_gradients(analytic, numeric, floor).max_relative_error;
}

// Same for a gradient with respect to an input tensor.
inline double input_grad_error(const Tensor2D& x, const Tensor2D& analytic,
                               const std::function<double(const Tensor2D&)>& loss, double h = 1e-6,
                               double floor = 1e-6) {
  const Eigen::Map<const Eigen::VectorXd> flat(x.data(), x.size());
  const Eigen::Map<const Eigen::VectorXd> a(analytic.data(), analytic.size());
  Tensor2D probe = x;
  const Eigen::VectorXd numeric = fairvfl::nn::finite_difference_gradient(
      [&](const Eigen::VectorXd& v) {
        Eigen::Map<Eigen::VectorXd>(probe.data(), probe.size()) = v;
        return loss(probe);
      },
      flat, h);
  return fairvfl::nn::compare_gradients(a, numeric, floor).max_relative_error;
}

// Linear readout loss sum(w .* y) used to pull gradients through a module.
inline double readout(const Tensor2D& y, const Tensor2D& w) { return (y.array() * w.array()).sum(); }

inline fairvfl::models::RepWidths tiny_widths() {
  fairvfl::models::RepWidths w;
  w.unified = 8;
  w.protected_widths = {4, 6};
  return w;
}

inline fairvfl::models::ArchConfig tiny_arch() {
  fairvfl::models::ArchConfig a;
  a.embedding_width = 3;
  a.encoder_hidden = 7;
  a.attention_heads = 2;
  a.pooling_hidden = 5;
  a.head_hidden = 6;
  a.mapper_hidden = 5;
  a.contrastive_hidden = 6;
  a.bias_hidden = 5;
  a.dropout = 0.2;
  return a;
}

/// A synthetic dataset split across platforms, plus a bundle sized to it.
struct World {
  fairvfl::data::VerticalDataset ds;
  fairvfl::data::PartitionAssignment assignment;
  std::unique_ptr<fairvfl::data::Shards> shards;
  fairvfl::models::ModelBundle bundle;

  std::vector<std::uint64_t> train_ids() const { return ds.ids_in(fairvfl::data::Split::Train); }
};

inline fairvfl::data::SyntheticSpec small_spec(std::uint64_t seed = 0, std::size_t samples = 600) {
  fairvfl::data::SyntheticSpec s;
  s.samples = samples;
  s.sensitive_classes = {2, 3};
  s.seed = seed;
  return s;
}

inline World make_world(const fairvfl::data::SyntheticSpec& spec, std::size_t platforms,
                        const fairvfl::models::RepWidths& widths, const fairvfl::models::ArchConfig& arch,
                        std::uint64_t seed) {
  World w;
  w.ds = fairvfl::data::generate_synthetic(spec);
  w.assignment = fairvfl::data::default_assignment(w.ds, platforms, seed);
  w.shards = std::make_unique<fairvfl::data::Shards>(fairvfl::data::partition_vertical(w.ds, w.assignment));
  w.bundle = fairvfl::models::ModelBundle::create(fairvfl::protocol::layout_for(*w.shards), widths, arch, seed);
  return w;
}

inline World make_world(std::uint64_t seed = 0) {
  return make_world(small_spec(seed), 2, tiny_widths(), tiny_arch(), seed);
}

inline fairvfl::protocol::FederationConfig fed_config(std::uint64_t seed, std::size_t m = 2) {
  fairvfl::protocol::FederationConfig c;
  c.weights = {std::vector<double>(m, 1.0), std::vector<double>(m, 0.25)};
  c.seed = seed;
  c.adam.learning_rate = 1e-3;
  return c;
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fairvfl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace fvt

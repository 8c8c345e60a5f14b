// SPDX-License-Identifier: Apache-2.0
#include "adflow/mrnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "adflow/errors.hpp"
#include "adflow/io.hpp"
#include "adflow/kernels.hpp"
#include "adflow/stft.hpp"
#include "header_fields.hpp"

namespace adflow {

namespace {

constexpr const char* kCheckpointMagic = "ADFLOW-MRNET";

// Beyond |z| = 30 the logistic rounds to within 1e-13 of its bounds; the
// clamp keeps the output strictly inside (0, 1).
constexpr double kLogitClamp = 30.0;

double sigmoid(double z) {
  const double zc = std::clamp(z, -kLogitClamp, kLogitClamp);
  return 1.0 / (1.0 + std::exp(-zc));
}

double sigmoid_grad(double z, double p) {
  return std::abs(z) > kLogitClamp ? 0.0 : p * (1.0 - p);
}

void check_batch(const MrRegressor& reg, const MrBatch& batch) {
  const std::size_t n = batch.size();
  const auto f = static_cast<std::size_t>(reg.config().feature_dim());
  if (n == 0) throw ParameterError("empty MR batch");
  if (batch.x_features.size() != n * f || batch.e_features.size() != n * f) {
    throw ShapeError("MR batch does not match the feature dimension");
  }
}

}  // namespace

void MrRegressorConfig::validate() const {
  stft.validate();
  if (embed_dim < 1 || hidden < 1) {
    throw ParameterError("MR embed_dim and hidden must be positive");
  }
}

MrRegressor::MrRegressor(MrRegressorConfig config) : config_(std::move(config)) {
  config_.validate();
  extractor_ = Mlp(layout_, "extractor", {config_.feature_dim(), config_.embed_dim});
  head_ = Mlp(layout_, "head", {2 * config_.embed_dim, config_.hidden, 1});
  params_.assign(layout_.size(), 0.0);
}

MrRegressor::MrRegressor(MrRegressorConfig config, std::uint64_t seed)
    : MrRegressor(std::move(config)) {
  Rng rng = Rng::stream(seed, 0x3a7);
  extractor_.init(params_, rng);
  head_.init(params_, rng);
}

void MrRegressor::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kCheckpointMagic << " v1 feat_dim=" << config_.feature_dim()
     << " embed_dim=" << config_.embed_dim << " hidden=" << config_.hidden
     << " n_fft=" << config_.stft.n_fft << " hop=" << config_.stft.hop << '\n';
  for (const auto& t : layout_.tensors()) {
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(t.rows),
                                   static_cast<std::uint32_t>(t.cols)};
    write_tensor(os, dims, params().subspan(t.offset, t.size()));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

MrRegressor MrRegressor::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(is, line);
  const auto fields = detail::parse_header(line, kCheckpointMagic);
  MrRegressorConfig config;
  config.embed_dim = detail::header_int(fields, "embed_dim");
  config.hidden = detail::header_int(fields, "hidden");
  config.stft.n_fft = detail::header_int(fields, "n_fft");
  config.stft.hop = detail::header_int(fields, "hop");
  if (detail::header_int(fields, "feat_dim") != config.feature_dim()) {
    throw IoError("checkpoint feat_dim disagrees with n_fft");
  }
  MrRegressor reg = [&] {
    try {
      return MrRegressor(config);
    } catch (const ParameterError& e) {
      throw IoError(std::string("checkpoint describes an invalid regressor: ") + e.what());
    }
  }();
  for (const auto& t : reg.layout_.tensors()) {
    const Tensor tensor = read_tensor(is);
    if (tensor.dims.size() != 2 || tensor.dims[0] != static_cast<std::uint32_t>(t.rows) ||
        tensor.dims[1] != static_cast<std::uint32_t>(t.cols)) {
      throw IoError("checkpoint tensor " + t.name + " has the wrong shape");
    }
    std::copy(tensor.data.begin(), tensor.data.end(),
              reg.params_.begin() + static_cast<std::ptrdiff_t>(t.offset));
  }
  return reg;
}

std::vector<double> mr_embed(const MrRegressor& reg, std::span<const double> features) {
  Mlp::Trace trace;
  reg.extractor().forward(reg.params(), features, trace);
  return trace.act.back();
}

std::vector<double> mr_embed(const MrRegressor& reg, const Waveform& w) {
  return mr_embed(reg, power_profile(w, reg.config().stft));
}

double mr_predict_features(const MrRegressor& reg, std::span<const double> x_features,
                           std::span<const double> e_features) {
  const auto wx = mr_embed(reg, x_features);
  const auto we = mr_embed(reg, e_features);
  std::vector<double> joint(wx);
  joint.insert(joint.end(), we.begin(), we.end());
  Mlp::Trace trace;
  reg.head().forward(reg.params(), joint, trace);
  return sigmoid(trace.act.back()[0]);
}

double mr_predict(const MrRegressor& reg, const Waveform& x, const Waveform& e) {
  const auto& p = reg.config().stft;
  return mr_predict_features(reg, power_profile(x, p), power_profile(e, p));
}

void MrBatch::add(std::span<const double> fx, std::span<const double> fe, double t) {
  x_features.insert(x_features.end(), fx.begin(), fx.end());
  e_features.insert(e_features.end(), fe.begin(), fe.end());
  tau.push_back(t);
}

void MrBatch::clear() {
  x_features.clear();
  e_features.clear();
  tau.clear();
}

LossGrad mr_loss_and_grad(const MrRegressor& reg, const MrBatch& batch) {
  check_batch(reg, batch);
  const std::size_t n = batch.size();
  const auto f = static_cast<std::size_t>(reg.config().feature_dim());
  const auto d = static_cast<Eigen::Index>(reg.config().embed_dim);
  const double scale = 1.0 / static_cast<double>(n);

  const std::size_t block = kernels::kBlockSize;
  const std::size_t n_blocks = (n + block - 1) / block;
  const int lanes = kernels::kReductionLanes;
  std::vector<std::vector<double>> lane_grad(static_cast<std::size_t>(lanes));
  std::vector<double> lane_loss(static_cast<std::size_t>(lanes), 0.0);

#pragma omp parallel for schedule(static, 1)
  for (int lane = 0; lane < lanes; ++lane) {
    auto& grad = lane_grad[static_cast<std::size_t>(lane)];
    double loss = 0.0;
    for (std::size_t bi = static_cast<std::size_t>(lane); bi < n_blocks;
         bi += static_cast<std::size_t>(lanes)) {
      if (grad.empty()) grad.assign(reg.param_count(), 0.0);
      const std::size_t first = bi * block;
      const auto count = static_cast<Eigen::Index>(std::min(block, n - first));
      Matrix fx(static_cast<Eigen::Index>(f), count);
      Matrix fe(static_cast<Eigen::Index>(f), count);
      for (Eigen::Index c = 0; c < count; ++c) {
        const std::size_t row = first + static_cast<std::size_t>(c);
        std::copy_n(batch.x_features.data() + row * f, f, fx.col(c).data());
        std::copy_n(batch.e_features.data() + row * f, f, fe.col(c).data());
      }
      Mlp::BlockTrace tx, te, th;
      reg.extractor().forward_block(reg.params(), fx, tx);
      reg.extractor().forward_block(reg.params(), fe, te);
      Matrix joint(2 * d, count);
      joint.topRows(d) = tx.act.back();
      joint.bottomRows(d) = te.act.back();
      reg.head().forward_block(reg.params(), joint, th);

      Matrix g_logit(1, count);
      for (Eigen::Index c = 0; c < count; ++c) {
        const double z = th.act.back()(0, c);
        const double p = sigmoid(z);
        const double diff = p - batch.tau[first + static_cast<std::size_t>(c)];
        loss += diff * diff;
        g_logit(0, c) = 2.0 * scale * diff * sigmoid_grad(z, p);
      }
      Matrix g_joint;
      reg.head().backward_block(reg.params(), th, g_logit, grad, &g_joint);
      reg.extractor().backward_block(reg.params(), tx, g_joint.topRows(d), grad, nullptr);
      reg.extractor().backward_block(reg.params(), te, g_joint.bottomRows(d), grad, nullptr);
    }
    lane_loss[static_cast<std::size_t>(lane)] = loss;
  }

  LossGrad out;
  out.grad.assign(reg.param_count(), 0.0);
  double loss = 0.0;
  for (int lane = 0; lane < lanes; ++lane) {
    loss += lane_loss[static_cast<std::size_t>(lane)];
    const auto& g = lane_grad[static_cast<std::size_t>(lane)];
    for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += g[i];
  }
  out.loss = loss * scale;
  return out;
}

namespace reference {

LossGrad mr_loss_and_grad(const MrRegressor& reg, const MrBatch& batch) {
  check_batch(reg, batch);
  const std::size_t n = batch.size();
  const auto f = static_cast<std::size_t>(reg.config().feature_dim());
  const auto d = static_cast<std::size_t>(reg.config().embed_dim);
  const double scale = 1.0 / static_cast<double>(n);

  LossGrad out;
  out.grad.assign(reg.param_count(), 0.0);
  double loss = 0.0;
  std::vector<double> g_joint(2 * d);
  for (std::size_t row = 0; row < n; ++row) {
    Mlp::Trace tx, te, th;
    reg.extractor().forward(reg.params(), std::span(batch.x_features.data() + row * f, f), tx);
    reg.extractor().forward(reg.params(), std::span(batch.e_features.data() + row * f, f), te);
    std::vector<double> joint(tx.act.back());
    joint.insert(joint.end(), te.act.back().begin(), te.act.back().end());
    reg.head().forward(reg.params(), joint, th);
    const double z = th.act.back()[0];
    const double p = sigmoid(z);
    const double diff = p - batch.tau[row];
    loss += diff * diff;
    const double g_logit = 2.0 * scale * diff * sigmoid_grad(z, p);
    reg.head().backward(reg.params(), th, std::span(&g_logit, 1), out.grad, g_joint);
    reg.extractor().backward(reg.params(), tx, std::span(g_joint).first(d), out.grad, {});
    reg.extractor().backward(reg.params(), te, std::span(g_joint).subspan(d), out.grad, {});
  }
  out.loss = loss * scale;
  return out;
}

}  // namespace reference

MrTrainResult mr_train(MrRegressor reg, const std::vector<DatasetItem>& dataset,
                       const TrainConfig& config, const MrTrainOptions& options) {
  config.validate();
  if (dataset.empty()) throw ParameterError("training set is empty");
  if (options.remix < 0) throw ParameterError("remix count must be non-negative");

  const StftParams& sp = reg.config().stft;
  const std::size_t n = dataset.size();
  const auto n_items = static_cast<long>(n);
  std::vector<std::vector<double>> fx(n), fe(n);
  std::vector<Spectrogram> s1_spec, b_spec;
  if (options.remix > 0) {
    s1_spec.reserve(n);
    b_spec.reserve(n);
    for (const auto& item : dataset) {
      s1_spec.push_back(stft(item.s1, sp));
      b_spec.push_back(stft(item.b, sp));
    }
  }
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n_items; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    fx[idx] = power_profile(dataset[idx].x, sp);
    fe[idx] = power_profile(dataset[idx].e, sp);
  }

  // Example k < n is item k as generated; later slots hold this epoch's remixes.
  struct Remix {
    std::size_t target;
    std::size_t background;
    double tau;
  };
  const std::size_t per_epoch = n * static_cast<std::size_t>(1 + options.remix);
  std::vector<Remix> remixes(per_epoch - n);
  std::vector<std::vector<double>> remix_fx(remixes.size());

  Rng rng = Rng::stream(config.seed, 0x3b1);
  AdamW optimizer(reg.param_count(), config.weight_decay);
  std::vector<std::size_t> order(per_epoch);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const int last_item = static_cast<int>(n) - 1;

  MrTrainResult result{std::move(reg), {}};
  MrBatch batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    for (std::size_t r = 0; r < remixes.size(); ++r) {
      remixes[r].target = r % n;
      remixes[r].background = static_cast<std::size_t>(rng.uniform_int(0, last_item));
      remixes[r].tau = dataset[static_cast<std::size_t>(rng.uniform_int(0, last_item))].tau;
    }
#pragma omp parallel for schedule(dynamic, 16)
    for (long r = 0; r < static_cast<long>(remixes.size()); ++r) {
      const Remix& m = remixes[static_cast<std::size_t>(r)];
      const auto& s = s1_spec[m.target].data();
      const auto& bg = b_spec[m.background].data();
      const auto bins = static_cast<std::size_t>(s1_spec[m.target].bins());
      const std::size_t frames = s1_spec[m.target].frames();
      std::vector<double> power(bins, 0.0);
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t k = 0; k < bins; ++k) {
          const std::size_t at = f * bins + k;
          power[k] += std::norm(m.tau * s[at] + (1.0 - m.tau) * bg[at]);
        }
      }
      for (double& v : power) v /= static_cast<double>(frames);
      remix_fx[static_cast<std::size_t>(r)] = power_profile(power);
    }

    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)))]);
    }
    double epoch_loss = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      batch.clear();
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t ex = order[k];
        if (ex < n) {
          batch.add(fx[ex], fe[ex], dataset[ex].tau);
        } else {
          const Remix& m = remixes[ex - n];
          batch.add(remix_fx[ex - n], fe[m.target], m.tau);
        }
      }
      LossGrad lg = mr_loss_and_grad(result.reg, batch);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError("MR training loss is not finite at epoch", epoch);
      }
      clip_grad_norm(lg.grad, config.grad_clip);
      optimizer.step(result.reg.params(), lg.grad, lr);
      epoch_loss += lg.loss;
      ++n_batches;
    }
    result.loss_trace.push_back(epoch_loss / n_batches);
  }
  return result;
}

double mr_oracle_lsq(std::span<const double> x, std::span<const double> s1,
                     std::span<const double> b) {
  if (x.size() != s1.size() || x.size() != b.size()) {
    throw ShapeError("mr_oracle_lsq: length mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = s1[i] - b[i];
    num += (x[i] - b[i]) * d;
    den += d * d;
  }
  if (!(den > 0.0)) {
    throw DegenerateInputError("mr_oracle_lsq: s1 and b coincide");
  }
  return std::clamp(num / den, 0.0, 1.0);
}

}  // namespace adflow

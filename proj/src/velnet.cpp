// SPDX-License-Identifier: Apache-2.0
#include "adflow/velnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "adflow/errors.hpp"
#include "adflow/io.hpp"
#include "adflow/kernels.hpp"
#include "adflow/signal.hpp"
#include "header_fields.hpp"

namespace adflow {

namespace {

constexpr const char* kCheckpointMagic = "ADFLOW-VELNET";

std::string join_dims(const std::vector<int>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(dims[i]);
  }
  return out;
}

std::vector<int> body_dims(const VelocityNetConfig& config) {
  std::vector<int> dims{config.input_dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.frame_len);
  return dims;
}

// Input column for one example: [context, projected embedding, tau embedding].
void fill_input(const VelocityNetConfig& config, std::span<const double> ctx,
                std::span<const double> embed, double tau, double* column) {
  std::copy(ctx.begin(), ctx.end(), column);
  std::copy(embed.begin(), embed.end(), column + ctx.size());
  const auto tau_features = embed_tau(tau, config.tau_embed_dim);
  std::copy(tau_features.begin(), tau_features.end(), column + ctx.size() + embed.size());
}

}  // namespace

void VelocityNetConfig::validate() const {
  if (frame_len < 1 || context < 0) {
    throw ParameterError("frame_len must be >= 1 and context >= 0");
  }
  if (tau_embed_dim < 0 || tau_embed_dim % 2 != 0) {
    throw ParameterError("tau_embed_dim must be even, got " + std::to_string(tau_embed_dim));
  }
  if (enroll_embed_dim < 0) {
    throw ParameterError("enroll_embed_dim must be non-negative");
  }
  for (int h : hidden) {
    if (h < 1) throw ParameterError("hidden widths must be positive");
  }
  features.validate();
}

VelocityNet::VelocityNet(VelocityNetConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.enroll_embed_dim > 0) {
    projection_ = Mlp(layout_, "enroll", {config_.features.dim(), config_.enroll_embed_dim});
  }
  body_ = Mlp(layout_, "body", body_dims(config_));
  params_.assign(layout_.size(), 0.0);
}

VelocityNet::VelocityNet(VelocityNetConfig config, std::uint64_t seed)
    : VelocityNet(std::move(config)) {
  Rng rng = Rng::stream(seed, 0x7e1);
  projection_.init(params_, rng);
  body_.init(params_, rng);
}

VelocityNet VelocityNet::zeros(VelocityNetConfig config) { return VelocityNet(std::move(config)); }

void VelocityNet::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kCheckpointMagic << " v1 dims=" << join_dims(body_dims(config_))
     << " frame_len=" << config_.frame_len << " context=" << config_.context
     << " tau_embed_dim=" << config_.tau_embed_dim
     << " enroll_embed_dim=" << config_.enroll_embed_dim
     << " n_fft=" << config_.features.stft.n_fft << " hop=" << config_.features.stft.hop
     << " n_bands=" << config_.features.n_bands << '\n';
  for (const auto& t : layout_.tensors()) {
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(t.rows),
                                   static_cast<std::uint32_t>(t.cols)};
    write_tensor(os, dims, params().subspan(t.offset, t.size()));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

VelocityNet VelocityNet::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(is, line);
  const auto fields = detail::parse_header(line, kCheckpointMagic);

  VelocityNetConfig config;
  config.frame_len = detail::header_int(fields, "frame_len");
  config.context = detail::header_int(fields, "context");
  config.tau_embed_dim = detail::header_int(fields, "tau_embed_dim");
  config.enroll_embed_dim = detail::header_int(fields, "enroll_embed_dim");
  config.features.stft.n_fft = detail::header_int(fields, "n_fft");
  config.features.stft.hop = detail::header_int(fields, "hop");
  config.features.n_bands = detail::header_int(fields, "n_bands");
  const auto dims_it = fields.find("dims");
  if (dims_it == fields.end()) throw IoError("checkpoint header lacks dims");
  std::vector<int> dims;
  {
    std::istringstream ds(dims_it->second);
    std::string part;
    while (std::getline(ds, part, ',')) dims.push_back(std::stoi(part));
  }
  if (dims.size() < 2) throw IoError("checkpoint dims need input and output widths");
  config.hidden.assign(dims.begin() + 1, dims.end() - 1);

  VelocityNet net = [&] {
    try {
      return VelocityNet(config);
    } catch (const ParameterError& e) {
      throw IoError(std::string("checkpoint describes an invalid network: ") + e.what());
    }
  }();
  if (body_dims(net.config_) != dims) {
    throw IoError("checkpoint dims do not match its frame settings");
  }
  for (const auto& t : net.layout_.tensors()) {
    const Tensor tensor = read_tensor(is);
    if (tensor.dims.size() != 2 || tensor.dims[0] != static_cast<std::uint32_t>(t.rows) ||
        tensor.dims[1] != static_cast<std::uint32_t>(t.cols)) {
      throw IoError("checkpoint tensor " + t.name + " has the wrong shape");
    }
    std::copy(tensor.data.begin(), tensor.data.end(),
              net.params_.begin() + static_cast<std::ptrdiff_t>(t.offset));
  }
  return net;
}

std::vector<double> embed_tau(double tau, int dim) {
  if (dim < 0 || dim % 2 != 0) {
    throw ParameterError("tau embedding dimension must be even, got " + std::to_string(dim));
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ParameterError("tau must lie in [0, 1]");
  }
  const int k_count = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int k = 0; k < k_count; ++k) {
    const double freq = k_count == 1 ? 1.0 : std::pow(64.0, static_cast<double>(k) / (k_count - 1));
    const double angle = 2.0 * std::numbers::pi * freq * tau;
    out[static_cast<std::size_t>(k)] = std::sin(angle);
    out[static_cast<std::size_t>(k_count + k)] = std::cos(angle);
  }
  return out;
}

std::vector<double> embed_enrollment_features(const VelocityNet& net,
                                              std::span<const double> features) {
  if (net.projection().empty()) return {};
  Mlp::Trace trace;
  net.projection().forward(net.params(), features, trace);
  return trace.act.back();
}

std::vector<double> embed_enrollment(const VelocityNet& net, const Waveform& e) {
  return embed_enrollment_features(net, spectral_features(e, net.config().features));
}

std::size_t frame_count(std::size_t length, int frame_len) {
  const auto l = static_cast<std::size_t>(frame_len);
  return (length + l - 1) / l;
}

std::vector<double> frame_context(std::span<const double> x, std::size_t frame, int frame_len,
                                  int context) {
  const auto l = static_cast<std::size_t>(frame_len);
  std::vector<double> out(static_cast<std::size_t>(2 * context + 1) * l, 0.0);
  const long first = static_cast<long>(frame) - context;
  for (int c = 0; c < 2 * context + 1; ++c) {
    const long f = first + c;
    if (f < 0) continue;
    const std::size_t start = static_cast<std::size_t>(f) * l;
    for (std::size_t t = 0; t < l && start + t < x.size(); ++t) {
      out[static_cast<std::size_t>(c) * l + t] = x[start + t];
    }
  }
  return out;
}

std::vector<double> vel_forward(const VelocityNet& net, std::span<const double> x_context,
                                std::span<const double> e_embed, double tau) {
  const auto& config = net.config();
  if (static_cast<int>(x_context.size()) != config.context_dim() ||
      static_cast<int>(e_embed.size()) != config.enroll_embed_dim) {
    throw ShapeError("velocity net input dimensions do not match the network");
  }
  std::vector<double> input(static_cast<std::size_t>(config.input_dim()));
  fill_input(config, x_context, e_embed, tau, input.data());
  Mlp::Trace trace;
  net.body().forward(net.params(), input, trace);
  return trace.act.back();
}

namespace {

std::vector<double> assemble_field(const VelocityNet& net, std::span<const double> x,
                                   std::span<const double> e_embed, double tau, bool threaded) {
  const auto& config = net.config();
  if (static_cast<int>(e_embed.size()) != config.enroll_embed_dim) {
    throw ShapeError("enrollment embedding has the wrong dimension");
  }
  const auto l = static_cast<std::size_t>(config.frame_len);
  const std::size_t n_frames = frame_count(x.size(), config.frame_len);
  std::vector<double> out(x.size(), 0.0);

  if (!threaded) {
    for (std::size_t j = 0; j < n_frames; ++j) {
      const auto ctx = frame_context(x, j, config.frame_len, config.context);
      const auto v = vel_forward(net, ctx, e_embed, tau);
      for (std::size_t t = 0; t < l && j * l + t < x.size(); ++t) out[j * l + t] = v[t];
    }
    return out;
  }

  const std::size_t block = kernels::kBlockSize;
  const auto n_blocks = static_cast<long>((n_frames + block - 1) / block);
  const auto in_dim = static_cast<Eigen::Index>(config.input_dim());
#pragma omp parallel for schedule(static)
  for (long bi = 0; bi < n_blocks; ++bi) {
    const std::size_t first = static_cast<std::size_t>(bi) * block;
    const std::size_t count = std::min(block, n_frames - first);
    Matrix input(in_dim, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
      const auto ctx = frame_context(x, first + c, config.frame_len, config.context);
      fill_input(config, ctx, e_embed, tau, input.col(static_cast<Eigen::Index>(c)).data());
    }
    Mlp::BlockTrace trace;
    net.body().forward_block(net.params(), input, trace);
    const Matrix& v = trace.act.back();
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t j = first + c;
      for (std::size_t t = 0; t < l && j * l + t < x.size(); ++t) {
        out[j * l + t] = v(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
      }
    }
  }
  return out;
}

void check_batch(const VelocityNet& net, const VelocityBatch& batch) {
  const auto& config = net.config();
  const std::size_t n = batch.size();
  if (n == 0) throw ParameterError("empty training batch");
  if (batch.context.size() != n * static_cast<std::size_t>(config.context_dim()) ||
      batch.target.size() != n * static_cast<std::size_t>(config.frame_len) ||
      (config.enroll_embed_dim > 0 &&
       batch.features.size() != n * static_cast<std::size_t>(config.features.dim()))) {
    throw ShapeError("velocity batch does not match the network dimensions");
  }
}

}  // namespace

std::vector<double> velocity_field(const VelocityNet& net, std::span<const double> x,
                                   std::span<const double> e_embed, double tau) {
  return assemble_field(net, x, e_embed, tau, true);
}

void VelocityBatch::add(std::span<const double> ctx, std::span<const double> feats, double t,
                        std::span<const double> tgt) {
  context.insert(context.end(), ctx.begin(), ctx.end());
  features.insert(features.end(), feats.begin(), feats.end());
  tau.push_back(t);
  target.insert(target.end(), tgt.begin(), tgt.end());
}

void VelocityBatch::clear() {
  context.clear();
  features.clear();
  tau.clear();
  target.clear();
}

LossGrad otcfm_loss_and_grad(const VelocityNet& net, const VelocityBatch& batch) {
  check_batch(net, batch);
  const auto& config = net.config();
  const std::size_t n = batch.size();
  const auto ctx_dim = static_cast<std::size_t>(config.context_dim());
  const auto feat_dim = static_cast<std::size_t>(config.features.dim());
  const auto embed_dim = static_cast<Eigen::Index>(config.enroll_embed_dim);
  const auto out_dim = static_cast<Eigen::Index>(config.frame_len);
  const double scale = 1.0 / (static_cast<double>(n) * config.frame_len);

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
      if (grad.empty()) grad.assign(net.param_count(), 0.0);
      const std::size_t first = bi * block;
      const auto count = static_cast<Eigen::Index>(std::min(block, n - first));

      Mlp::BlockTrace proj_trace;
      if (embed_dim > 0) {
        Matrix feats(static_cast<Eigen::Index>(feat_dim), count);
        for (Eigen::Index c = 0; c < count; ++c) {
          const double* src = batch.features.data() + (first + static_cast<std::size_t>(c)) * feat_dim;
          std::copy(src, src + feat_dim, feats.col(c).data());
        }
        net.projection().forward_block(net.params(), feats, proj_trace);
      }

      Matrix input(static_cast<Eigen::Index>(config.input_dim()), count);
      Matrix target(out_dim, count);
      for (Eigen::Index c = 0; c < count; ++c) {
        const std::size_t row = first + static_cast<std::size_t>(c);
        std::span<const double> ctx(batch.context.data() + row * ctx_dim, ctx_dim);
        std::vector<double> embed;
        if (embed_dim > 0) {
          const auto col = proj_trace.act.back().col(c);
          embed.assign(col.data(), col.data() + embed_dim);
        }
        fill_input(config, ctx, embed, batch.tau[row], input.col(c).data());
        const double* tgt = batch.target.data() + row * static_cast<std::size_t>(out_dim);
        std::copy(tgt, tgt + out_dim, target.col(c).data());
      }

      Mlp::BlockTrace trace;
      net.body().forward_block(net.params(), input, trace);
      const Matrix diff = trace.act.back() - target;
      loss += diff.squaredNorm();
      const Matrix g_out = (2.0 * scale) * diff;
      Matrix g_in;
      net.body().backward_block(net.params(), trace, g_out, grad, embed_dim > 0 ? &g_in : nullptr);
      if (embed_dim > 0) {
        const Matrix g_embed = g_in.middleRows(static_cast<Eigen::Index>(ctx_dim), embed_dim);
        net.projection().backward_block(net.params(), proj_trace, g_embed, grad, nullptr);
      }
    }
    lane_loss[static_cast<std::size_t>(lane)] = loss;
  }

  LossGrad out;
  out.grad.assign(net.param_count(), 0.0);
  double loss = 0.0;
  for (int lane = 0; lane < lanes; ++lane) {
    loss += lane_loss[static_cast<std::size_t>(lane)];
    const auto& g = lane_grad[static_cast<std::size_t>(lane)];
    if (g.empty()) continue;
    for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += g[i];
  }
  out.loss = loss * scale;
  return out;
}

namespace reference {

LossGrad otcfm_loss_and_grad(const VelocityNet& net, const VelocityBatch& batch) {
  check_batch(net, batch);
  const auto& config = net.config();
  const std::size_t n = batch.size();
  const auto ctx_dim = static_cast<std::size_t>(config.context_dim());
  const auto feat_dim = static_cast<std::size_t>(config.features.dim());
  const auto embed_dim = static_cast<std::size_t>(config.enroll_embed_dim);
  const auto out_dim = static_cast<std::size_t>(config.frame_len);
  const double scale = 1.0 / (static_cast<double>(n) * config.frame_len);

  LossGrad out;
  out.grad.assign(net.param_count(), 0.0);
  double loss = 0.0;
  std::vector<double> input(static_cast<std::size_t>(config.input_dim()));
  std::vector<double> g_out(out_dim);
  std::vector<double> g_in(input.size());
  for (std::size_t row = 0; row < n; ++row) {
    Mlp::Trace proj_trace;
    std::vector<double> embed;
    if (embed_dim > 0) {
      net.projection().forward(net.params(),
                               std::span(batch.features.data() + row * feat_dim, feat_dim),
                               proj_trace);
      embed = proj_trace.act.back();
    }
    fill_input(config, std::span(batch.context.data() + row * ctx_dim, ctx_dim), embed,
               batch.tau[row], input.data());
    Mlp::Trace trace;
    net.body().forward(net.params(), input, trace);
    const auto& v = trace.act.back();
    for (std::size_t k = 0; k < out_dim; ++k) {
      const double d = v[k] - batch.target[row * out_dim + k];
      loss += d * d;
      g_out[k] = 2.0 * scale * d;
    }
    net.body().backward(net.params(), trace, g_out, out.grad, g_in);
    if (embed_dim > 0) {
      net.projection().backward(net.params(), proj_trace,
                                std::span(g_in).subspan(ctx_dim, embed_dim), out.grad, {});
    }
  }
  out.loss = loss * scale;
  return out;
}

std::vector<double> velocity_field(const VelocityNet& net, std::span<const double> x,
                                   std::span<const double> e_embed, double tau) {
  return assemble_field(net, x, e_embed, tau, false);
}

}  // namespace reference

VelocityTrainResult train_velocity(VelocityNet net, const std::vector<DatasetItem>& dataset,
                                   const TrainConfig& config,
                                   const VelocityTrainOptions& options) {
  config.validate();
  options.path.validate();
  if (dataset.empty()) throw ParameterError("training set is empty");
  if (options.frames_per_item < 1) throw ParameterError("frames_per_item must be positive");

  const auto& net_config = net.config();
  const auto n_items = static_cast<long>(dataset.size());
  std::vector<std::vector<double>> enroll_features(dataset.size());
  if (net_config.enroll_embed_dim > 0) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n_items; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      enroll_features[idx] = spectral_features(dataset[idx].e, net_config.features);
    }
  }

  Rng rng = Rng::stream(config.seed, 0x7a1);
  AdamW optimizer(net.param_count(), config.weight_decay);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto l = static_cast<std::size_t>(net_config.frame_len);

  VelocityTrainResult result{std::move(net), {}};
  VelocityBatch batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)))]);
    }
    double epoch_loss = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      for (std::size_t k = start; k < stop; ++k) {
        const DatasetItem& item = dataset[order[k]];
        const double tau = rng.uniform();
        const PathState state =
            sample_path_state(item.b.samples(), item.s1.samples(), tau, options.path, rng.next_u64());
        const Signal u = target_velocity(state, item.b.samples(), item.s1.samples(), options.path);
        const std::size_t n_frames = frame_count(u.size(), net_config.frame_len);
        std::vector<double> target(l);
        for (int f = 0; f < options.frames_per_item; ++f) {
          const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n_frames) - 1));
          const auto ctx = frame_context(state.x, j, net_config.frame_len, net_config.context);
          for (std::size_t t = 0; t < l; ++t) {
            target[t] = j * l + t < u.size() ? u[j * l + t] : 0.0;
          }
          batch.add(ctx, enroll_features[order[k]], tau, target);
        }
      }
      LossGrad lg = otcfm_loss_and_grad(result.net, batch);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError("velocity training loss is not finite at epoch", epoch);
      }
      clip_grad_norm(lg.grad, config.grad_clip);
      optimizer.step(result.net.params(), lg.grad, lr);
      epoch_loss += lg.loss;
      ++n_batches;
    }
    result.loss_trace.push_back(epoch_loss / n_batches);
  }
  return result;
}

}  // namespace adflow

// SPDX-License-Identifier: Apache-2.0
#include "adflow/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include "adflow/csv.hpp"
#include "adflow/errors.hpp"
#include "adflow/rng.hpp"

namespace adflow {

namespace {

using Member = std::variant<int RunConfig::*, double RunConfig::*, std::string RunConfig::*,
                            std::uint64_t RunConfig::*>;

struct Field {
  const char* key;
  Member member;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"seed", &RunConfig::seed},
      {"n_train", &RunConfig::n_train},
      {"n_eval", &RunConfig::n_eval},
      {"duration_s", &RunConfig::duration_s},
      {"sample_rate_hz", &RunConfig::sample_rate_hz},
      {"n_fft", &RunConfig::n_fft},
      {"hop", &RunConfig::hop},
      {"n_bands", &RunConfig::n_bands},
      {"sigma_min", &RunConfig::sigma_min},
      {"sigma_max", &RunConfig::sigma_max},
      {"max_nfe", &RunConfig::max_nfe},
      {"epsilon", &RunConfig::epsilon},
      {"nfe_mode", &RunConfig::nfe_mode},
      {"frame_len", &RunConfig::frame_len},
      {"context", &RunConfig::context},
      {"tau_embed_dim", &RunConfig::tau_embed_dim},
      {"enroll_embed_dim", &RunConfig::enroll_embed_dim},
      {"hidden", &RunConfig::hidden},
      {"frames_per_item", &RunConfig::frames_per_item},
      {"lr_init", &RunConfig::lr_init},
      {"lr_min", &RunConfig::lr_min},
      {"warmup_epochs", &RunConfig::warmup_epochs},
      {"t_max_epochs", &RunConfig::t_max_epochs},
      {"weight_decay", &RunConfig::weight_decay},
      {"grad_clip", &RunConfig::grad_clip},
      {"batch_size", &RunConfig::batch_size},
      {"epochs", &RunConfig::epochs},
      {"mr_embed_dim", &RunConfig::mr_embed_dim},
      {"mr_hidden", &RunConfig::mr_hidden},
      {"mr_lr_init", &RunConfig::mr_lr_init},
      {"mr_lr_min", &RunConfig::mr_lr_min},
      {"mr_batch_size", &RunConfig::mr_batch_size},
      {"mr_epochs", &RunConfig::mr_epochs},
      {"mr_t_max_epochs", &RunConfig::mr_t_max_epochs},
      {"mr_remix", &RunConfig::mr_remix},
      {"output_dir", &RunConfig::output_dir},
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("config key '" + key + "' has invalid value '" + value + "'");
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ',')) {
    out.push_back(parse_number<int>("hidden", trim(part)));
  }
  return out;
}

template <typename Fn>
auto as_parameter_check(Fn&& fn) {
  try {
    return fn();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const Field& field = find_field(key);
  const std::string value = trim(raw);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(this->*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          this->*member = value;
        } else {
          this->*member = parse_number<T>(key, value);
        }
      },
      field.member);
}

std::string RunConfig::get(const std::string& key) const {
  const Field& field = find_field(key);
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(this->*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return this->*member;
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(this->*member);
        } else {
          return std::to_string(this->*member);
        }
      },
      field.member);
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig config;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " lacks '='");
    }
    config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse(buffer.str());
}

std::string RunConfig::to_text() const {
  std::string out = "# effective configuration\n";
  for (const auto& key : keys()) out += key + " = " + get(key) + "\n";
  return out;
}

void RunConfig::validate() const {
  if (n_train < 1 || n_eval < 1) throw ConfigError("n_train and n_eval must be positive");
  if (nfe_mode != "adaptive" && nfe_mode != "fixed") {
    throw ConfigError("nfe_mode must be 'adaptive' or 'fixed'");
  }
  as_parameter_check([&] {
    dataset();
    stft().validate();
    path().validate();
    nfe_policy().validate();
    velocity_net().validate();
    mr_regressor().validate();
    velocity_training().validate();
    mr_training().validate();
    if (mr_remix < 0) throw ParameterError("mr_remix must be non-negative");
    if (frames_per_item < 1) throw ParameterError("frames_per_item must be positive");
    if (!(duration_s > 0.0) || sample_rate_hz <= 0) {
      throw ParameterError("duration_s and sample_rate_hz must be positive");
    }
    return 0;
  });
}

DatasetConfig RunConfig::dataset() const { return {duration_s, sample_rate_hz}; }

StftParams RunConfig::stft() const { return {n_fft, hop}; }

SpectralFeatureConfig RunConfig::features() const { return {stft(), n_bands}; }

PathParams RunConfig::path() const { return {sigma_min, sigma_max}; }

NfePolicy RunConfig::nfe_policy() const {
  NfePolicy p;
  p.max_nfe = max_nfe;
  p.epsilon = epsilon;
  p.mode = nfe_mode == "fixed" ? NfePolicy::Mode::kFixed : NfePolicy::Mode::kAdaptive;
  return p;
}

VelocityNetConfig RunConfig::velocity_net() const {
  VelocityNetConfig c;
  c.frame_len = frame_len;
  c.context = context;
  c.tau_embed_dim = tau_embed_dim;
  c.enroll_embed_dim = enroll_embed_dim;
  c.hidden = parse_int_list(hidden);
  c.features = features();
  return c;
}

MrRegressorConfig RunConfig::mr_regressor() const {
  return {stft(), mr_embed_dim, mr_hidden};
}

MrTrainOptions RunConfig::mr_options() const { return {mr_remix}; }

TrainConfig RunConfig::velocity_training() const {
  TrainConfig t;
  t.lr_init = lr_init;
  t.lr_min = lr_min;
  t.warmup_epochs = warmup_epochs;
  t.t_max_epochs = t_max_epochs;
  t.weight_decay = weight_decay;
  t.grad_clip = grad_clip;
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.seed = seed;
  return t;
}

TrainConfig RunConfig::mr_training() const {
  TrainConfig t = velocity_training();
  t.lr_init = mr_lr_init;
  t.lr_min = mr_lr_min;
  t.batch_size = mr_batch_size;
  t.epochs = mr_epochs;
  t.t_max_epochs = mr_t_max_epochs;
  return t;
}

std::uint64_t RunConfig::train_seed() const { return Rng::stream(seed, 0x7124).next_u64(); }

std::uint64_t RunConfig::eval_seed() const { return Rng::stream(seed, 0xe7a1).next_u64(); }

}  // namespace adflow

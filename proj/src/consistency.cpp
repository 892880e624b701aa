#include "rocmlab/consistency.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "rocmlab/errors.hpp"

namespace rocmlab {

namespace {

constexpr char kMagic[8] = {'R', 'C', 'M', 'L', 'C', 'K', 'P', 'T'};

double pick(std::span<const double> v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }
int pick(std::span<const int> v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }

void check_inputs(const StepInputs& in, std::size_t rows) {
  auto ok = [rows](std::size_t n) { return n == 1 || n == rows; };
  if (!ok(in.t.size()) || !ok(in.omega.size()) || !ok(in.conditions.size())) {
    throw ShapeError("step inputs must hold 1 or " + std::to_string(rows) + " entries");
  }
}

Tensor column(std::size_t rows, const std::function<double(std::size_t)>& value) {
  std::vector<Real> v(rows);
  for (std::size_t i = 0; i < rows; ++i) v[i] = static_cast<Real>(value(i));
  return Tensor::from({rows, 1}, std::move(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

// ---------------------------------------------------------------- helpers

std::unique_ptr<ConsistencyFunction> frozen_copy(const ConsistencyFunction& f) {
  auto copy = f.clone();
  for (Tensor& p : copy->parameters()) p.set_requires_grad(false);
  return copy;
}

std::vector<double> flatten_parameters(const std::vector<Tensor>& params) {
  std::vector<double> flat;
  for (const Tensor& p : params) flat.insert(flat.end(), p.data().begin(), p.data().end());
  return flat;
}

void assign_parameters(std::vector<Tensor>& params, std::span<const double> flat) {
  if (flat.size() != parameter_count(params)) throw ShapeError("parameter vector has the wrong length");
  std::size_t offset = 0;
  for (Tensor& p : params) {
    auto values = p.mutable_data();
    for (Real& v : values) v = static_cast<Real>(flat[offset++]);
  }
}

std::size_t parameter_count(const std::vector<Tensor>& params) {
  std::size_t n = 0;
  for (const Tensor& p : params) n += p.numel();
  return n;
}

double parameter_distance(const ConsistencyFunction& a, const ConsistencyFunction& b) {
  const auto fa = flatten_parameters(a.parameters());
  const auto fb = flatten_parameters(b.parameters());
  if (fa.size() != fb.size()) throw ShapeError("parameter layouts differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) acc += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  return std::sqrt(acc);
}

// ---------------------------------------------------------------- NetworkConfig

nlohmann::json NetworkConfig::to_json() const {
  return {{"dim", dim},
          {"hidden", hidden},
          {"layers", layers},
          {"frequencies", frequencies},
          {"num_conditions", num_conditions},
          {"cond_dim", cond_dim},
          {"omega_max", omega_max},
          {"sigma_data", sigma_data},
          {"zero_output", zero_output}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& doc) {
  NetworkConfig c;
  c.dim = doc.value("dim", c.dim);
  c.hidden = doc.value("hidden", c.hidden);
  c.layers = doc.value("layers", c.layers);
  c.frequencies = doc.value("frequencies", c.frequencies);
  c.num_conditions = doc.value("num_conditions", c.num_conditions);
  c.cond_dim = doc.value("cond_dim", c.cond_dim);
  c.omega_max = doc.value("omega_max", c.omega_max);
  c.sigma_data = doc.value("sigma_data", c.sigma_data);
  c.zero_output = doc.value("zero_output", c.zero_output);
  if (c.dim == 0 || c.hidden == 0 || c.layers == 0) throw ConfigError("network extents must be positive");
  if (!(c.sigma_data > 0.0) || !(c.omega_max > 0.0)) throw ConfigError("sigma_data and omega_max must be positive");
  return c;
}

// ---------------------------------------------------------------- ConsistencyModel

ConsistencyModel::ConsistencyModel(NetworkConfig config, NoiseSchedule schedule, std::uint64_t init_seed)
    : config_(config), schedule_(schedule) {
  Rng rng(init_seed);
  auto gaussian = [&rng](std::size_t n, double scale) {
    std::vector<Real> v(n);
    for (Real& x : v) x = static_cast<Real>(scale * rng.normal());
    return v;
  };
  const std::size_t rows = config_.num_conditions + 1;
  params_.push_back(Tensor::parameter({rows, config_.cond_dim}, gaussian(rows * config_.cond_dim, 1.0)));
  std::size_t fan_in = config_.dim + 4 * config_.frequencies + config_.cond_dim;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    params_.push_back(Tensor::parameter({fan_in, config_.hidden},
                                        gaussian(fan_in * config_.hidden, 1.0 / std::sqrt(double(fan_in)))));
    params_.push_back(Tensor::parameter({config_.hidden}, std::vector<Real>(config_.hidden, Real{0})));
    fan_in = config_.hidden;
  }
  const double out_scale = config_.zero_output ? 0.0 : 1.0 / std::sqrt(double(fan_in));
  params_.push_back(Tensor::parameter({fan_in, config_.dim}, gaussian(fan_in * config_.dim, out_scale)));
  params_.push_back(Tensor::parameter({config_.dim}, std::vector<Real>(config_.dim, Real{0})));
}

ConsistencyModel::ConsistencyModel(const ConsistencyModel& other)
    : config_(other.config_), schedule_(other.schedule_) {
  for (const Tensor& p : other.params_) params_.push_back(p.clone());
}

ConsistencyModel& ConsistencyModel::operator=(const ConsistencyModel& other) {
  if (this != &other) {
    ConsistencyModel copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::unique_ptr<ConsistencyFunction> ConsistencyModel::clone() const {
  return std::make_unique<ConsistencyModel>(*this);
}

double ConsistencyModel::c_skip(double t) const {
  const double s = schedule_.sigma(t);
  const double sd2 = config_.sigma_data * config_.sigma_data;
  return sd2 / (s * s + sd2);
}

double ConsistencyModel::c_out(double t) const {
  const double s = schedule_.sigma(t);
  const double sd = config_.sigma_data;
  return s * sd / std::sqrt(s * s + sd * sd);
}

Tensor ConsistencyModel::features(std::size_t rows, const StepInputs& in) const {
  const std::size_t nf = config_.frequencies;
  std::vector<Real> v(rows * 4 * nf);
  for (std::size_t i = 0; i < rows; ++i) {
    const double t = pick(in.t, i);
    const double u = pick(in.omega, i) / config_.omega_max;
    Real* row = v.data() + i * 4 * nf;
    for (std::size_t j = 0; j < nf; ++j) {
      const double w = 0.5 * std::numbers::pi * static_cast<double>(j + 1);
      row[j] = static_cast<Real>(std::sin(w * t));
      row[nf + j] = static_cast<Real>(std::cos(w * t));
      row[2 * nf + j] = static_cast<Real>(std::sin(w * u));
      row[3 * nf + j] = static_cast<Real>(std::cos(w * u));
    }
  }
  return Tensor::from({rows, 4 * nf}, std::move(v));
}

Tensor ConsistencyModel::network(const Tensor& x, const StepInputs& in) const {
  if (x.dim() != 2 || x.shape()[1] != config_.dim) {
    throw ShapeError("model input must be [batch, " + std::to_string(config_.dim) + "], got " + shape_str(x.shape()));
  }
  const std::size_t rows = x.shape()[0];
  check_inputs(in, rows);
  std::vector<int> labels(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const int c = pick(in.conditions, i);
    if (c == kNullCondition) {
      labels[i] = static_cast<int>(config_.num_conditions);
    } else if (c < 0 || static_cast<std::size_t>(c) >= config_.num_conditions) {
      throw std::out_of_range("condition label " + std::to_string(c) + " out of range");
    } else {
      labels[i] = c;
    }
  }
  const Tensor parts[] = {x, features(rows, in), gather_rows(params_[0], labels)};
  Tensor h = concat_cols(parts);
  std::size_t p = 1;
  for (std::size_t l = 0; l < config_.layers; ++l, p += 2) h = tanh(matmul(h, params_[p]) + params_[p + 1]);
  return matmul(h, params_[p]) + params_[p + 1];
}

Tensor ConsistencyModel::apply(const Tensor& x, const StepInputs& in) const {
  const std::size_t rows = x.dim() == 2 ? x.shape()[0] : 0;
  check_inputs(in, rows);
  const Tensor skip = column(rows, [&](std::size_t i) { return c_skip(pick(in.t, i)); });
  const Tensor out = column(rows, [&](std::size_t i) { return c_out(pick(in.t, i)); });
  return skip * x + out * network(x, in);
}

void ConsistencyModel::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = "rocmlab-checkpoint";
  header["version"] = 1;
  header["architecture"] = config_.to_json();
  header["schedule"] = {{"kind", "cosine"}, {"K", schedule_.steps()}};
  header["K"] = schedule_.steps();
  header["sigma_data"] = config_.sigma_data;
  nlohmann::json shapes = nlohmann::json::array();
  for (const Tensor& p : params_) shapes.push_back(p.shape());
  header["parameter_shapes"] = shapes;
  header["num_parameters"] = parameter_count(params_);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kMagic, sizeof kMagic);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor& p : params_) {
    for (Real v : p.data()) write_u64(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

ConsistencyModel ConsistencyModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError(path + " is not a rocmlab checkpoint");
  const std::uint64_t len = read_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ConfigError("truncated checkpoint header in " + path);
  const auto header = nlohmann::json::parse(text);
  NetworkConfig cfg = NetworkConfig::from_json(header.at("architecture"));
  ConsistencyModel model(cfg, NoiseSchedule(header.at("K").get<int>()), 0);
  const auto shapes = header.at("parameter_shapes");
  if (shapes.size() != model.params_.size()) throw ConfigError("checkpoint parameter layout mismatch");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].get<Shape>() != model.params_[i].shape()) throw ConfigError("checkpoint parameter shape mismatch");
    for (Real& v : model.params_[i].mutable_data()) v = static_cast<Real>(std::bit_cast<double>(read_u64(in)));
  }
  return model;
}

// ---------------------------------------------------------------- LinearPolicy

LinearPolicy::LinearPolicy(std::vector<double> theta) {
  const std::size_t d = theta.size();
  params_.push_back(Tensor::parameter({d}, std::vector<Real>(theta.begin(), theta.end())));
}

Tensor LinearPolicy::apply(const Tensor& x, const StepInputs& in) const {
  if (x.dim() != 2 || x.shape()[1] != dim()) throw ShapeError("policy input has shape " + shape_str(x.shape()));
  check_inputs(in, x.shape()[0]);
  return Tensor::zeros(x.shape()) + params_[0];
}

std::unique_ptr<ConsistencyFunction> LinearPolicy::clone() const {
  auto copy = std::make_unique<LinearPolicy>(theta());
  copy->params_[0].set_requires_grad(params_[0].requires_grad());
  return copy;
}

std::vector<double> LinearPolicy::theta() const { return {params_[0].data().begin(), params_[0].data().end()}; }

// ---------------------------------------------------------------- generation

std::vector<Tensor> draw_noises(std::size_t batch, std::size_t dim, int steps, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> noises(static_cast<std::size_t>(steps) + 1);
  for (int k = steps; k >= 0; --k) {
    const auto v = rng.normals(batch * dim);
    noises[static_cast<std::size_t>(k)] = Tensor::from({batch, dim}, std::span<const double>(v));
  }
  return noises;
}

TrajectoryRecord generate(const ConsistencyFunction& f, const NoiseSchedule& sched, std::span<const int> conditions,
                          double omega, std::uint64_t seed, const GenerateOptions& opts) {
  auto record = replay(f, sched, conditions, omega, draw_noises(conditions.size(), f.dim(), sched.steps(), seed), opts);
  record.seed = seed;
  return record;
}

TrajectoryRecord replay(const ConsistencyFunction& f, const NoiseSchedule& sched, std::span<const int> conditions,
                        double omega, const std::vector<Tensor>& noises, const GenerateOptions& opts) {
  const int K = sched.steps();
  const std::size_t B = conditions.size();
  if (B == 0) throw std::invalid_argument("generate needs at least one condition");
  if (noises.size() != static_cast<std::size_t>(K) + 1) throw ShapeError("need K + 1 noise tensors");
  for (const Tensor& e : noises) {
    if (e.shape() != Shape{B, f.dim()}) throw ShapeError("noise tensor has shape " + shape_str(e.shape()));
  }
  TrajectoryRecord rec;
  rec.steps = K;
  rec.omega = omega;
  rec.final_sigma = opts.final_sigma;
  rec.conditions.assign(conditions.begin(), conditions.end());
  rec.noises = noises;
  rec.states.resize(static_cast<std::size_t>(K) + 1);
  rec.denoised.resize(static_cast<std::size_t>(K) + 1);

  const int full = opts.grad_steps <= 0 || opts.grad_steps >= K ? K : opts.grad_steps;
  const double om[] = {omega};
  Tensor x = noises[static_cast<std::size_t>(K)];
  rec.states[static_cast<std::size_t>(K)] = x;
  for (int k = K; k >= 1; --k) {
    const double tk[] = {sched.time(k)};
    const StepInputs in{tk, om, conditions};
    Tensor denoised;
    if (k > full) {
      NoGradScope no_grad;
      denoised = f.apply(x, in);
    } else {
      denoised = f.apply(x, in);
    }
    const auto prev = static_cast<std::size_t>(k - 1);
    const double noise_scale = sched.sigma_at(k - 1) + (k == 1 ? opts.final_sigma : 0.0);
    x = denoised * sched.alpha_at(k - 1) + noises[prev] * noise_scale;
    rec.denoised[static_cast<std::size_t>(k)] = denoised;
    rec.states[prev] = x;
  }
  return rec;
}

}  // namespace rocmlab

#include "snnid/estimators.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "snnid/errors.hpp"
#include "snnid/rng.hpp"

namespace snnid {

namespace {

using nlohmann::json;

ad::Tensor uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  const double a = 1.0 / std::sqrt(static_cast<double>(cols));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-a, a);
  return ad::Tensor::matrix(rows, cols, std::move(v), true);
}

ad::Tensor default_b_param() {
  return ad::Tensor::vector(
      {std::log(100e-6), std::log(10e-6), std::log(0.1)}, true);
}

json tensor_to_json(const ad::Tensor& t) {
  return json{{"shape", t.shape()}, {"data", t.values()}};
}

ad::Tensor tensor_from_json(const json& j) {
  auto shape = j.at("shape").get<ad::Shape>();
  auto data = j.at("data").get<std::vector<double>>();
  return ad::Tensor::from(std::move(shape), std::move(data), true);
}

void set_from_json(ad::Tensor& t, const json& j, const char* name) {
  const auto shape = j.at("shape").get<ad::Shape>();
  if (shape != t.shape())
    throw ConfigError(std::string("checkpoint shape mismatch for ") + name);
  t.set_values(j.at("data").get<std::vector<double>>());
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("bad checkpoint file " + path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("write failed: " + path);
}

ParamEstimate split_params(const ad::Tensor& log_params) {
  const ad::Tensor p = ad::exp(log_params);
  return {ad::element(p, 0), ad::element(p, 1), ad::element(p, 2)};
}

ad::Tensor state_vector(const std::vector<double>& v, std::size_t n) {
  return v.empty() ? ad::Tensor::zeros({n})
                   : ad::Tensor::vector(v);  // carried state, no gradient
}

}  // namespace

std::size_t SpikeRecord::count(std::size_t layer, std::size_t step) const {
  const std::size_t h = layer_sizes.at(layer);
  const auto& b = bits.at(layer);
  std::size_t c = 0;
  for (std::size_t n = 0; n < h; ++n) c += b[step * h + n];
  return c;
}

std::size_t SpikeRecord::layer_total(std::size_t layer) const {
  const auto& b = bits.at(layer);
  std::size_t c = 0;
  for (auto v : b) c += v;
  return c;
}

double SpikeRecord::layer_rate(std::size_t layer) const {
  const auto& b = bits.at(layer);
  if (b.empty()) return 0.0;
  return static_cast<double>(layer_total(layer)) /
         static_cast<double>(b.size());
}

std::vector<std::array<double, 2>> normalize_input(const Waveform& w) {
  if (w.size() == 0) throw std::invalid_argument("normalize_input: empty");
  const std::size_t n = w.size();
  std::vector<std::array<double, 2>> out(n);
  for (int ch = 0; ch < 2; ++ch) {
    const auto& v = ch == 0 ? w.iL : w.Vo;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      out[i][ch] = sd < 1e-12 ? 0.0 : (v[i] - mean) / sd;
  }
  return out;
}

std::pair<ad::Tensor, ad::Tensor> lif_step(const LifLayer& layer,
                                           const ad::Tensor& u_prev,
                                           const ad::Tensor& s_prev_out,
                                           const ad::Tensor& s_in,
                                           const ad::SurrogateConfig& cfg) {
  ad::Tensor u = ad::sub(
      ad::add(ad::scalar_mul(u_prev, layer.beta), ad::matvec(layer.W, s_in)),
      ad::scalar_mul(s_prev_out.detached(), layer.u_thr));
  ad::Tensor s = ad::spike_threshold(
      ad::sub(u, ad::Tensor::full(u.shape(), layer.u_thr)), cfg);
  return {std::move(u), std::move(s)};
}

SnnOutput snn_forward(const SnnEstimator& est,
                      const std::vector<std::array<double, 2>>& inputs,
                      const SnnState* init_state) {
  if (inputs.empty())
    throw std::invalid_argument("snn_forward: empty input sequence");
  if (est.l1.in_dim() != 2)
    throw std::invalid_argument("snn_forward: layer 1 must map 2 channels");
  const std::size_t H = est.H;
  const std::size_t n = inputs.size();

  const SnnState none{};
  const SnnState& st = init_state != nullptr ? *init_state : none;
  ad::Tensor u1 = state_vector(st.u1, H), u2 = state_vector(st.u2, H),
             u3 = state_vector(st.u3, H);
  ad::Tensor s1 = state_vector(st.s1, H), s2 = state_vector(st.s2, H),
             s3 = state_vector(st.s3, H);
  ad::Tensor m = state_vector(st.m, 3);

  SnnOutput out;
  out.record.n_steps = n;
  out.record.layer_sizes = {H, H, H};
  out.record.bits.assign(3, std::vector<std::uint8_t>(n * H, 0));

  for (std::size_t k = 0; k < n; ++k) {
    try {
      const ad::Tensor x = ad::Tensor::vector({inputs[k][0], inputs[k][1]});
      std::tie(u1, s1) = lif_step(est.l1, u1, s1, x, est.surrogate);
      std::tie(u2, s2) = lif_step(est.l2, u2, s2, s1, est.surrogate);
      std::tie(u3, s3) = lif_step(est.l3, u3, s3, s2, est.surrogate);
      m = ad::add(ad::scalar_mul(m, est.readout.beta_out),
                  ad::matvec(est.readout.W_out, s3));
    } catch (const NumericError&) {
      throw NumericError("non-finite membrane at timestep " +
                         std::to_string(k));
    }
    const ad::Tensor* spikes[3] = {&s1, &s2, &s3};
    for (int l = 0; l < 3; ++l) {
      const auto& v = spikes[l]->values();
      for (std::size_t i = 0; i < H; ++i)
        out.record.bits[l][k * H + i] = v[i] != 0.0 ? 1 : 0;
    }
  }

  out.params = split_params(ad::add(m, est.readout.b_param));
  out.final_state = {u1.values(), u2.values(), u3.values(),
                     s1.values(), s2.values(), s3.values(), m.values()};
  return out;
}

ParamEstimate ff_forward(const FfEstimator& est, const Waveform& w) {
  if (w.size() != 100)
    throw std::invalid_argument(
        "ff_forward: input must have exactly 100 samples");
  const auto norm = normalize_input(w);
  std::vector<double> flat(200);
  for (std::size_t i = 0; i < 100; ++i) {
    flat[i] = norm[i][0];
    flat[100 + i] = norm[i][1];
  }
  const ad::Tensor x = ad::Tensor::vector(std::move(flat));
  const ad::Tensor h1 = ad::tanh(ad::matvec(est.W1, x));
  const ad::Tensor h2 = ad::tanh(ad::matvec(est.W2, h1));
  const ad::Tensor h3 = ad::tanh(ad::matvec(est.W3, h2));
  return split_params(ad::add(ad::matvec(est.W4, h3), est.b_param));
}

SnnEstimator SnnEstimator::init(std::uint64_t seed, std::size_t H) {
  if (H == 0) throw std::invalid_argument("hidden width must be > 0");
  Rng rng(seed);
  SnnEstimator est;
  est.H = H;
  est.l1.W = uniform_matrix(rng, H, 2);
  est.l2.W = uniform_matrix(rng, H, H);
  est.l3.W = uniform_matrix(rng, H, H);
  est.readout.W_out = uniform_matrix(rng, 3, H);
  est.readout.b_param = default_b_param();
  return est;
}

FfEstimator FfEstimator::init(std::uint64_t seed) {
  Rng rng(seed);
  FfEstimator est;
  est.W1 = uniform_matrix(rng, 128, 200);
  est.W2 = uniform_matrix(rng, 128, 128);
  est.W3 = uniform_matrix(rng, 128, 128);
  est.W4 = uniform_matrix(rng, 3, 128);
  est.b_param = default_b_param();
  return est;
}

ParamEstimate SnnEstimatorHandle::estimate(const Waveform& w) const {
  return snn_forward(est_, normalize_input(w)).params;
}

std::vector<ad::Tensor> SnnEstimatorHandle::weight_leaves() {
  return {est_.l1.W, est_.l2.W, est_.l3.W, est_.readout.W_out};
}

std::vector<ad::Tensor> SnnEstimatorHandle::bias_leaves() {
  return {est_.readout.b_param};
}

void SnnEstimatorHandle::save(const std::string& path) const {
  json j;
  j["kind"] = "snn";
  j["config"] = {{"H", est_.H},
                 {"beta", est_.l1.beta},
                 {"beta_out", est_.readout.beta_out},
                 {"u_thr", est_.l1.u_thr},
                 {"alpha", est_.surrogate.alpha}};
  j["weights"] = {{"l1.W", tensor_to_json(est_.l1.W)},
                  {"l2.W", tensor_to_json(est_.l2.W)},
                  {"l3.W", tensor_to_json(est_.l3.W)},
                  {"readout.W_out", tensor_to_json(est_.readout.W_out)}};
  j["b_param"] = est_.readout.b_param.values();
  write_json_file(path, j);
}

void SnnEstimatorHandle::load(const std::string& path) {
  const json j = read_json_file(path);
  if (j.value("kind", "") != "snn")
    throw ConfigError("checkpoint kind mismatch (want snn): " + path);
  const auto& w = j.at("weights");
  set_from_json(est_.l1.W, w.at("l1.W"), "l1.W");
  set_from_json(est_.l2.W, w.at("l2.W"), "l2.W");
  set_from_json(est_.l3.W, w.at("l3.W"), "l3.W");
  set_from_json(est_.readout.W_out, w.at("readout.W_out"), "readout.W_out");
  est_.readout.b_param.set_values(j.at("b_param").get<std::vector<double>>());
}

ParamEstimate FfEstimatorHandle::estimate(const Waveform& w) const {
  return ff_forward(est_, w);
}

std::vector<ad::Tensor> FfEstimatorHandle::weight_leaves() {
  return {est_.W1, est_.W2, est_.W3, est_.W4};
}

std::vector<ad::Tensor> FfEstimatorHandle::bias_leaves() {
  return {est_.b_param};
}

void FfEstimatorHandle::save(const std::string& path) const {
  json j;
  j["kind"] = "ff";
  j["weights"] = {{"W1", tensor_to_json(est_.W1)},
                  {"W2", tensor_to_json(est_.W2)},
                  {"W3", tensor_to_json(est_.W3)},
                  {"W4", tensor_to_json(est_.W4)}};
  j["b_param"] = est_.b_param.values();
  write_json_file(path, j);
}

void FfEstimatorHandle::load(const std::string& path) {
  const json j = read_json_file(path);
  if (j.value("kind", "") != "ff")
    throw ConfigError("checkpoint kind mismatch (want ff): " + path);
  const auto& w = j.at("weights");
  set_from_json(est_.W1, w.at("W1"), "W1");
  set_from_json(est_.W2, w.at("W2"), "W2");
  set_from_json(est_.W3, w.at("W3"), "W3");
  set_from_json(est_.W4, w.at("W4"), "W4");
  est_.b_param.set_values(j.at("b_param").get<std::vector<double>>());
}

std::unique_ptr<Estimator> load_estimator(const std::string& path) {
  const json j = read_json_file(path);
  const std::string kind = j.value("kind", "");
  if (kind == "snn") {
    const auto& cfg = j.at("config");
    SnnEstimator est;
    est.H = cfg.at("H").get<std::size_t>();
    const double beta = cfg.at("beta").get<double>();
    const double u_thr = cfg.at("u_thr").get<double>();
    if (!(beta > 0.0 && beta < 1.0) || !(u_thr > 0.0))
      throw ConfigError("checkpoint config out of range: " + path);
    est.readout.beta_out = cfg.at("beta_out").get<double>();
    if (!(est.readout.beta_out > 0.0 && est.readout.beta_out < 1.0))
      throw ConfigError("checkpoint config out of range: " + path);
    est.surrogate.alpha = cfg.at("alpha").get<double>();
    for (LifLayer* l : {&est.l1, &est.l2, &est.l3}) {
      l->beta = beta;
      l->u_thr = u_thr;
    }
    const auto& w = j.at("weights");
    est.l1.W = tensor_from_json(w.at("l1.W"));
    est.l2.W = tensor_from_json(w.at("l2.W"));
    est.l3.W = tensor_from_json(w.at("l3.W"));
    est.readout.W_out = tensor_from_json(w.at("readout.W_out"));
    est.readout.b_param = ad::Tensor::vector(
        j.at("b_param").get<std::vector<double>>(), true);
    if (est.l1.W.rows() != est.H || est.l2.W.rows() != est.H ||
        est.l2.W.cols() != est.H)
      throw ConfigError("checkpoint weight shapes do not match H: " + path);
    return std::make_unique<SnnEstimatorHandle>(std::move(est));
  }
  if (kind == "ff") {
    const auto& w = j.at("weights");
    FfEstimator est;
    est.W1 = tensor_from_json(w.at("W1"));
    est.W2 = tensor_from_json(w.at("W2"));
    est.W3 = tensor_from_json(w.at("W3"));
    est.W4 = tensor_from_json(w.at("W4"));
    est.b_param = ad::Tensor::vector(
        j.at("b_param").get<std::vector<double>>(), true);
    return std::make_unique<FfEstimatorHandle>(std::move(est));
  }
  throw ConfigError("unknown checkpoint kind in " + path);
}

}  // namespace snnid

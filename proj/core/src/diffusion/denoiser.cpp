#include "paydiff/diffusion/denoiser.hpp"

#include <cmath>

namespace paydiff {

using nn::Graph;
using nn::Tensor;
using nn::Var;

std::string to_string(Conditioning c) { return c == Conditioning::film ? "film" : "additive"; }

Conditioning parse_conditioning(const std::string& s) {
  if (s == "film") return Conditioning::film;
  if (s == "additive") return Conditioning::additive;
  throw DomainError("unknown conditioning '" + s + "' (film, additive)");
}

void DenoiserConfig::check() const {
  if (n_dof < 1) throw DomainError("denoiser: n_dof must be positive");
  if (widths.empty()) throw DomainError("denoiser: widths must not be empty");
  if (kernel < 1 || kernel % 2 == 0) throw DomainError("denoiser: kernel must be odd");
  if (groups < 1) throw DomainError("denoiser: groups must be positive");
  for (int w : widths) {
    if (w < 1 || w % groups != 0) {
      throw DomainError("denoiser: width " + std::to_string(w) + " not divisible by " + std::to_string(groups) +
                        " groups");
    }
  }
  const int factor = 1 << (widths.size() - 1);
  if (horizon < 2 || horizon % factor != 0) {
    throw DomainError("denoiser: horizon " + std::to_string(horizon) + " must be divisible by " +
                      std::to_string(factor));
  }
  if (time_dim < 4 || time_dim % 2 != 0 || cond_dim < 1) throw DomainError("denoiser: bad embedding sizes");
}

nlohmann::json DenoiserConfig::to_json() const {
  return {{"n_dof", n_dof},
          {"horizon", horizon},
          {"widths", widths},
          {"kernel", kernel},
          {"groups", groups},
          {"time_dim", time_dim},
          {"cond_dim", cond_dim},
          {"encoding", to_string(encoding.scheme)},
          {"range_mode", to_string(encoding.range_mode)},
          {"conditioning", to_string(conditioning)}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
  DenoiserConfig c;
  c.n_dof = j.value("n_dof", c.n_dof);
  c.horizon = j.value("horizon", c.horizon);
  c.widths = j.value("widths", c.widths);
  c.kernel = j.value("kernel", c.kernel);
  c.groups = j.value("groups", c.groups);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.cond_dim = j.value("cond_dim", c.cond_dim);
  c.encoding.scheme = parse_payload_scheme(j.value("encoding", to_string(c.encoding.scheme)));
  c.encoding.range_mode = parse_range_mode(j.value("range_mode", to_string(c.encoding.range_mode)));
  c.conditioning = parse_conditioning(j.value("conditioning", to_string(c.conditioning)));
  c.check();
  return c;
}

template <class T>
Tensor<T> timestep_embedding(const std::vector<int>& steps, int dim) {
  const int half = dim / 2;
  Tensor<T> e({static_cast<int>(steps.size()), dim});
  for (std::size_t b = 0; b < steps.size(); ++b) {
    for (int j = 0; j < half; ++j) {
      const double freq = std::exp(-std::log(10000.0) * j / std::max(1, half - 1));
      const double a = steps[b] * freq;
      e[b * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)] = static_cast<T>(std::sin(a));
      e[b * static_cast<std::size_t>(dim) + static_cast<std::size_t>(half + j)] = static_cast<T>(std::cos(a));
    }
  }
  return e;
}

template <class T>
Denoiser<T>::Denoiser(DenoiserConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
  cfg_.check();
  const int td = cfg_.time_dim, cd = cfg_.cond_dim;
  t1_ = make_dense("time.0", td, 2 * td);
  t2_ = make_dense("time.1", 2 * td, td);
  p1_ = make_dense("payload.0", cfg_.encoding.dim(), cd);
  p2_ = make_dense("payload.1", cd, cd);

  const auto& w = cfg_.widths;
  const int L = static_cast<int>(w.size());
  int c = cfg_.channels();
  for (int i = 0; i < L; ++i) {
    const std::string p = "down." + std::to_string(i);
    Level lv;
    lv.r1 = make_res(p + ".res0", c, w[i]);
    lv.r2 = make_res(p + ".res1", w[i], w[i]);
    if (i < L - 1) {
      lv.has_resample = true;
      lv.resample = make_conv(p + ".down", w[i], w[i], 3, 2, 1);
    }
    down_.push_back(lv);
    c = w[i];
  }
  mid_ = make_res("mid", c, c);
  for (int i = L - 2; i >= 0; --i) {
    const std::string p = "up." + std::to_string(i);
    Level lv;
    lv.has_resample = true;
    lv.resample = make_conv(p + ".up", c, c, 3, 1, 1);
    lv.r1 = make_res(p + ".res0", c + w[i], w[i]);
    lv.r2 = make_res(p + ".res1", w[i], w[i]);
    up_.push_back(lv);
    c = w[i];
  }
  final_conv_ = make_conv("final.conv", c, c, cfg_.kernel, 1, cfg_.kernel / 2);
  final_norm_ = make_norm("final.norm", c);
  out_conv_ = make_conv("final.out", c, cfg_.channels(), 1, 1, 0);
}

template <class T>
typename Denoiser<T>::Conv Denoiser<T>::make_conv(const std::string& name, int in, int out, int k, int stride,
                                                  int padding) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * k));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> w({out, in, k}), b({out});
  for (auto& v : w.data) v = static_cast<T>(u(rng_));
  for (auto& v : b.data) v = static_cast<T>(u(rng_));
  return {&params_.add(name + ".w", std::move(w)), &params_.add(name + ".b", std::move(b)), stride, padding};
}

template <class T>
typename Denoiser<T>::Dense Denoiser<T>::make_dense(const std::string& name, int in, int out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> w({out, in}), b({out});
  for (auto& v : w.data) v = static_cast<T>(u(rng_));
  for (auto& v : b.data) v = static_cast<T>(u(rng_));
  return {&params_.add(name + ".w", std::move(w)), &params_.add(name + ".b", std::move(b))};
}

template <class T>
typename Denoiser<T>::Norm Denoiser<T>::make_norm(const std::string& name, int c) {
  return {&params_.add(name + ".gamma", Tensor<T>({c}, T(1))), &params_.add(name + ".beta", Tensor<T>({c}))};
}

template <class T>
typename Denoiser<T>::ResBlock Denoiser<T>::make_res(const std::string& name, int in, int out) {
  ResBlock r;
  const int k = cfg_.kernel;
  r.out = out;
  r.c1 = make_conv(name + ".conv0", in, out, k, 1, k / 2);
  r.n1 = make_norm(name + ".norm0", out);
  const int cond_out = cfg_.conditioning == Conditioning::film ? 2 * out : out;
  r.cond = make_dense(name + ".cond", cfg_.time_dim + cfg_.cond_dim, cond_out);
  r.c2 = make_conv(name + ".conv1", out, out, k, 1, k / 2);
  r.n2 = make_norm(name + ".norm1", out);
  if (in != out) {
    r.has_skip = true;
    r.skip = make_conv(name + ".skip", in, out, 1, 1, 0);
  }
  return r;
}

template <class T>
Var Denoiser<T>::conv(Graph<T>& g, const Conv& c, Var x) const {
  return g.conv1d(x, g.param(*c.w), g.param(*c.b), c.stride, c.padding);
}

template <class T>
Var Denoiser<T>::dense(Graph<T>& g, const Dense& d, Var x) const {
  return g.linear(x, g.param(*d.w), g.param(*d.b));
}

template <class T>
Var Denoiser<T>::norm_act(Graph<T>& g, const Norm& n, Var x) const {
  return g.silu(g.group_norm(x, g.param(*n.gamma), g.param(*n.beta), cfg_.groups));
}

template <class T>
Var Denoiser<T>::res(Graph<T>& g, const ResBlock& r, Var x, Var cond) const {
  Var h = norm_act(g, r.n1, conv(g, r.c1, x));
  const Var c = dense(g, r.cond, cond);
  if (cfg_.conditioning == Conditioning::film) {
    h = g.film(h, g.add_scalar(g.slice_features(c, 0, r.out), T(1)), g.slice_features(c, r.out, r.out));
  } else {
    h = g.add_channel(h, c);
  }
  h = norm_act(g, r.n2, conv(g, r.c2, h));
  return g.add(h, r.has_skip ? conv(g, r.skip, x) : x);
}

template <class T>
Var Denoiser<T>::forward(Graph<T>& g, Var x, const std::vector<int>& steps, Var payload) const {
  const auto& xs = g.value(x).shape;
  const int B = static_cast<int>(steps.size());
  if (xs != nn::Shape{B, cfg_.channels(), cfg_.horizon}) {
    throw DimensionError("denoiser: input has shape " + nn::shape_str(xs) + ", expected " +
                         nn::shape_str({B, cfg_.channels(), cfg_.horizon}));
  }
  if (g.value(payload).shape != nn::Shape{B, cfg_.encoding.dim()}) {
    throw DimensionError("denoiser: payload has shape " + nn::shape_str(g.value(payload).shape) + ", expected " +
                         nn::shape_str({B, cfg_.encoding.dim()}));
  }
  const Var t = dense(g, t2_, g.silu(dense(g, t1_, g.input(timestep_embedding<T>(steps, cfg_.time_dim)))));
  const Var p = dense(g, p2_, g.silu(dense(g, p1_, payload)));
  const Var cond = g.silu(g.concat_features(t, p));

  std::vector<Var> skips;
  Var h = x;
  for (const Level& lv : down_) {
    h = res(g, lv.r2, res(g, lv.r1, h, cond), cond);
    skips.push_back(h);
    if (lv.has_resample) h = conv(g, lv.resample, h);
  }
  h = res(g, mid_, h, cond);
  std::size_t s = skips.size() - 1;
  for (const Level& lv : up_) {
    h = conv(g, lv.resample, g.upsample2(h));
    h = g.concat_channels(h, skips[--s]);
    h = res(g, lv.r2, res(g, lv.r1, h, cond), cond);
  }
  h = norm_act(g, final_norm_, conv(g, final_conv_, h));
  return conv(g, out_conv_, h);
}

template <class T>
Tensor<T> Denoiser<T>::predict(const Tensor<T>& x, const std::vector<int>& steps, const Tensor<T>& payload) const {
  Graph<T> g(false);
  return g.value(forward(g, g.input(x), steps, g.input(payload)));
}

template <class T>
Var predict_noise(Graph<T>& g, const Denoiser<T>& net, const NoiseSchedule& schedule, Var x,
                  const std::vector<int>& steps, Var payload) {
  std::vector<T> skip, out;
  for (int k : steps) {
    if (k < 1 || k > schedule.K) throw DomainError("diffusion step " + std::to_string(k) + " outside [1, K]");
    const double ab = schedule.alpha_bar[static_cast<std::size_t>(k)];
    skip.push_back(static_cast<T>(std::sqrt(1.0 - ab)));
    out.push_back(static_cast<T>(std::sqrt(ab)));
  }
  const Var f = net.forward(g, x, steps, payload);
  return g.add(g.scale_batch(x, skip), g.scale_batch(f, out));
}

template Var predict_noise(Graph<float>&, const Denoiser<float>&, const NoiseSchedule&, Var, const std::vector<int>&,
                           Var);
template Var predict_noise(Graph<double>&, const Denoiser<double>&, const NoiseSchedule&, Var,
                           const std::vector<int>&, Var);
template Tensor<float> timestep_embedding<float>(const std::vector<int>&, int);
template Tensor<double> timestep_embedding<double>(const std::vector<int>&, int);
template class Denoiser<float>;
template class Denoiser<double>;

}  // namespace paydiff

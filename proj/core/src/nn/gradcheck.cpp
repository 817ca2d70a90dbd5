#include "paydiff/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace paydiff::nn {

GradCheckReport gradient_check(ParameterSet<double>& params, const std::function<Var(Graph<double>&)>& loss,
                               int per_param, std::uint64_t seed, double step, double floor) {
  params.zero_grad();
  {
    Graph<double> g;
    g.backward(loss(g));
  }
  auto eval = [&] {
    Graph<double> g(false);
    return g.value(loss(g))[0];
  };
  Rng rng(seed);
  GradCheckReport rep;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<double>& p = params[i];
    if (p.frozen) continue;
    const std::size_t n = p.value.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = k;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(n, static_cast<std::size_t>(per_param)));
    for (std::size_t k : idx) {
      const double saved = p.value[k];
      p.value[k] = saved + step;
      const double up = eval();
      p.value[k] = saved - step;
      const double down = eval();
      p.value[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[k];
      const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++rep.checked;
      if (err > rep.max_relative_error) {
        rep.max_relative_error = err;
        rep.worst = p.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return rep;
}

}  // namespace paydiff::nn

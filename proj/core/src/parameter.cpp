#include "ssr/parameter.hpp"

#include <cmath>
#include <stdexcept>

#include "ssr/adam.hpp"

namespace ssr {

Parameter::Parameter(std::string n, Tensor value)
    : name(std::move(n)),
      tensor(std::move(value)),
      first_moment(tensor.size(), 0.0),
      second_moment(tensor.size(), 0.0) {}

Tensor ParameterSet::create(const std::string& name, Shape shape, std::vector<double> values) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  Tensor t(std::move(shape), std::move(values), /*requires_grad=*/true);
  params_.emplace_back(name, t);
  return t;
}

Tensor ParameterSet::normal(const std::string& name, Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return create(name, std::move(shape), std::move(v));
}

Tensor ParameterSet::uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return create(name, std::move(shape), std::move(v));
}

Tensor ParameterSet::zeros(const std::string& name, Shape shape) {
  const auto n = shape_numel(shape);
  return create(name, std::move(shape), std::vector<double>(n, 0.0));
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam: learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam: beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam: beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam: epsilon must be positive");
}

AdamStepStats adam_step(ParameterSet& params, const AdamConfig& config) {
  config.validate();
  AdamStepStats stats;
  for (auto& p : params.all()) {
    if (!p.tensor.has_grad()) {
      ++stats.skipped;
      continue;
    }
    ++p.step;
    const double t = static_cast<double>(p.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    auto w = p.tensor.mutable_values();
    auto g = p.tensor.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      p.first_moment[i] = config.beta1 * p.first_moment[i] + (1.0 - config.beta1) * g[i];
      p.second_moment[i] = config.beta2 * p.second_moment[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = p.first_moment[i] / c1;
      const double v_hat = p.second_moment[i] / c2;
      w[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    ++stats.updated;
  }
  params.zero_grad();
  return stats;
}

}  // namespace ssr

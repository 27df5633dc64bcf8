#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ssr/tensor.hpp"

namespace ssr {

/// A named learnable leaf tensor together with its Adam moments.
struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  Parameter(std::string name, Tensor value);
};

using Rng = std::mt19937_64;

/// Registry of parameters owned by a model, in registration order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Tensor create(const std::string& name, Shape shape, std::vector<double> values);
  Tensor normal(const std::string& name, Shape shape, double stddev, Rng& rng);
  Tensor uniform(const std::string& name, Shape shape, double bound, Rng& rng);
  Tensor zeros(const std::string& name, Shape shape);

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

 private:
  // Handles returned by create() share the parameter's node, so vector
  // growth relocating the Parameter structs does not invalidate them.
  std::vector<Parameter> params_;
};

}  // namespace ssr

#include "ssr/nn.hpp"

namespace ssr {

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
               double stddev)
    : weight(params.normal(name + ".weight", {in, out}, stddev, rng)),
      bias(params.zeros(name + ".bias", {out})) {}

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, std::size_t width)
    : gain(params.create(name + ".gain", {width}, std::vector<double>(width, 1.0))),
      bias(params.zeros(name + ".bias", {width})) {}

}  // namespace ssr

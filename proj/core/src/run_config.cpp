#include "ssr/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "ssr/sketch.hpp"

namespace ssr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument(fmt::format("not a number: '{}'", v));
  return out;
}

std::vector<std::uint64_t> parse_list(const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<std::uint64_t>(item));
  }
  return out;
}

template <class T>
std::string opt(const std::optional<T>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

}  // namespace

std::size_t RunConfig::resolved_epochs() const { return epochs.value_or(preset == "full" ? 200 : 300); }

std::size_t RunConfig::resolved_batch_size() const { return batch_size.value_or(preset == "full" ? 128 : 16); }

ModelConfig RunConfig::model_config() const {
  ModelConfig m = preset == "full" ? ModelConfig::full() : ModelConfig::desk();
  if (width) m.width = *width;
  if (memory_heads) m.memory_heads = *memory_heads;
  if (k_neighbors) m.graph.k = *k_neighbors;
  if (transformer_layers) m.transformer_layers = *transformer_layers;
  if (transformer_heads) m.transformer_heads = *transformer_heads;
  if (max_strokes) m.max_strokes = *max_strokes;
  if (tau) m.kernel.tau = *tau;
  if (kernel_epsilon) m.kernel.epsilon = *kernel_epsilon;
  return m;
}

ScenarioConfig RunConfig::scenario_config() const {
  ScenarioConfig s = ScenarioConfig::defaults_for(scenario_from_string(scenario));
  if (!token_path.empty()) s.path = token_path_from_string(token_path);
  s.fusion = fusion_mode_from_string(fusion_mode);
  s.weights = weights;
  return s;
}

void RunConfig::validate() const {
  if (preset != "desk" && preset != "full") throw std::invalid_argument(fmt::format("unknown preset '{}'", preset));
  if (train_data.empty()) throw std::invalid_argument("train_data is required");
  if (resolved_epochs() == 0) throw std::invalid_argument("epochs must be positive");
  if (resolved_batch_size() == 0) throw std::invalid_argument("batch_size must be positive");
  adam.validate();
  scenario_config().validate();
  model_config().validate();
}

std::string RunConfig::to_text() const {
  std::string seeds;
  for (std::size_t i = 0; i < sweep_seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(sweep_seeds[i]);
  const std::pair<const char*, std::string> rows[] = {
      {"train_data", train_data.string()},
      {"test_data", test_data.string()},
      {"label_space", label_space.string()},
      {"output_dir", output_dir.string()},
      {"scenario", scenario},
      {"token_path", token_path},
      {"fusion_mode", fusion_mode},
      {"preset", preset},
      {"seed", std::to_string(seed)},
      {"epochs", std::to_string(resolved_epochs())},
      {"batch_size", std::to_string(resolved_batch_size())},
      {"learning_rate", fmt::format("{}", adam.learning_rate)},
      {"beta1", fmt::format("{}", adam.beta1)},
      {"beta2", fmt::format("{}", adam.beta2)},
      {"epsilon", fmt::format("{}", adam.epsilon)},
      {"lambda1", fmt::format("{}", weights.lambda1)},
      {"lambda2", fmt::format("{}", weights.lambda2)},
      {"lambda_s", fmt::format("{}", weights.lambda_s)},
      {"lambda_c", fmt::format("{}", weights.lambda_c)},
      {"width", opt(width)},
      {"memory_heads", opt(memory_heads)},
      {"k_neighbors", opt(k_neighbors)},
      {"transformer_layers", opt(transformer_layers)},
      {"transformer_heads", opt(transformer_heads)},
      {"max_strokes", opt(max_strokes)},
      {"tau", opt(tau)},
      {"kernel_epsilon", opt(kernel_epsilon)},
      {"stop_train_acc", opt(stop_train_acc)},
      {"stop_train_c_metric", opt(stop_train_c_metric)},
      {"sweep_seeds", seeds},
  };
  std::string out;
  for (const auto& [k, v] : rows)
    if (!v.empty()) out += fmt::format("{} = {}\n", k, v);
  return out;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig c;
  auto path = [&](std::filesystem::path& field) {
    return [&field, &base_dir](const std::string& v) {
      std::filesystem::path p(v);
      field = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
  };
  auto size = [](std::optional<std::size_t>& f) {
    return [&f](const std::string& v) { f = parse_number<std::size_t>(v); };
  };
  auto real = [](double& f) { return [&f](const std::string& v) { f = parse_number<double>(v); }; };
  auto opt_real = [](std::optional<double>& f) {
    return [&f](const std::string& v) { f = parse_number<double>(v); };
  };
  auto str = [](std::string& f) { return [&f](const std::string& v) { f = v; }; };

  const std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"train_data", path(c.train_data)},
      {"test_data", path(c.test_data)},
      {"label_space", path(c.label_space)},
      {"output_dir", path(c.output_dir)},
      {"scenario", str(c.scenario)},
      {"token_path", str(c.token_path)},
      {"fusion_mode", str(c.fusion_mode)},
      {"preset", str(c.preset)},
      {"seed", [&c](const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
      {"epochs", size(c.epochs)},
      {"batch_size", size(c.batch_size)},
      {"learning_rate", real(c.adam.learning_rate)},
      {"beta1", real(c.adam.beta1)},
      {"beta2", real(c.adam.beta2)},
      {"epsilon", real(c.adam.epsilon)},
      {"lambda1", real(c.weights.lambda1)},
      {"lambda2", real(c.weights.lambda2)},
      {"lambda_s", real(c.weights.lambda_s)},
      {"lambda_c", real(c.weights.lambda_c)},
      {"width", size(c.width)},
      {"memory_heads", size(c.memory_heads)},
      {"k_neighbors", size(c.k_neighbors)},
      {"transformer_layers", size(c.transformer_layers)},
      {"transformer_heads", size(c.transformer_heads)},
      {"max_strokes", size(c.max_strokes)},
      {"tau", opt_real(c.tau)},
      {"kernel_epsilon", opt_real(c.kernel_epsilon)},
      {"stop_train_acc", opt_real(c.stop_train_acc)},
      {"stop_train_c_metric", opt_real(c.stop_train_c_metric)},
      {"sweep_seeds", [&c](const std::string& v) { c.sweep_seeds = parse_list(v); }},
  };

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("expected 'key = value'", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw DataError(fmt::format("unknown config key '{}'", key), lineno);
    try {
      it->second(value);
    } catch (const std::invalid_argument& e) {
      throw DataError(fmt::format("{}: {}", key, e.what()), lineno);
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

}  // namespace ssr

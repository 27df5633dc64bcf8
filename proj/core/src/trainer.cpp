#include "ssr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ssr/checkpoint.hpp"
#include "ssr/metrics.hpp"

namespace ssr {

using nlohmann::json;

namespace {

bool same_vocabulary(const LabelSpace& a, const LabelSpace& b) {
  if (a.category_names != b.category_names || a.component_names != b.component_names) return false;
  return !a.has_composition() || !b.has_composition() || a.composition == b.composition;
}

struct LossSums {
  double l1 = 0, l2 = 0, l4 = 0, l5 = 0, l6 = 0, total = 0;
  bool has_l2 = false, has_l5 = false, has_l6 = false;
  std::size_t count = 0;

  void add(const LossValues& v) {
    l1 += v.l1.value_or(0.0);
    if (v.l2) l2 += *v.l2, has_l2 = true;
    l4 += v.l4.value_or(0.0);
    if (v.l5) l5 += *v.l5, has_l5 = true;
    if (v.l6) l6 += *v.l6, has_l6 = true;
    total += v.total;
    ++count;
  }

  LossValues mean() const {
    const double n = static_cast<double>(std::max<std::size_t>(count, 1));
    LossValues m;
    m.l1 = l1 / n;
    if (has_l2) m.l2 = l2 / n;
    m.l4 = l4 / n;
    if (has_l5) m.l5 = l5 / n;
    if (has_l6) m.l6 = l6 / n;
    m.total = total / n;
    return m;
  }
};

// Selection key for the best epoch: Acc@1 first, then the scenario's
// auxiliary metric.
std::pair<double, double> rank_of(const EvalMetrics& m) {
  return {m.acc_at_1, m.c_metric.value_or(m.existence_accuracy.value_or(0.0))};
}

json loss_json(const LossValues& v) {
  json j;
  if (v.l1) j["L1"] = *v.l1;
  if (v.l2) j["L2"] = *v.l2;
  if (v.l4) j["L4"] = *v.l4;
  if (v.l5) j["L5"] = *v.l5;
  if (v.l6) j["L6"] = *v.l6;
  j["total"] = v.total;
  return j;
}

[[noreturn]] void abort_on_nan(const TrainSettings& settings, const SsrModel& model, const Dataset& data,
                               std::size_t epoch, const std::vector<std::size_t>& batch, std::size_t offending,
                               const LossValues& values) {
  std::string where = "no dump written";
  if (!settings.output_dir.empty()) {
    json samples = json::array();
    for (std::size_t idx : batch) samples.push_back(sketch_to_json(data.samples[idx], model.labels()));
    const json dump = {{"epoch", epoch},
                       {"batch_indices", batch},
                       {"offending_index", offending},
                       {"losses", loss_json(values)},
                       {"samples", samples}};
    std::filesystem::create_directories(settings.output_dir);
    const auto path = settings.output_dir / "nan_dump.json";
    std::ofstream(path) << dump.dump(2) << '\n';
    where = "batch dumped to " + path.string();
  }
  throw TrainingError(fmt::format("non-finite loss at epoch {} on sample {}; {}", epoch, offending, where));
}

}  // namespace

json metrics_to_json(const EvalMetrics& m) {
  json j = {{"samples", m.samples}, {"acc_at_1", m.acc_at_1}};
  if (m.c_metric) j["c_metric"] = *m.c_metric;
  if (m.existence_accuracy) j["existence_accuracy"] = *m.existence_accuracy;
  return j;
}

json epoch_to_json(const EpochRecord& r) {
  json j = loss_json(r.losses);
  j["epoch"] = r.epoch;
  json metrics = json::object();
  if (r.train) metrics["train"] = metrics_to_json(*r.train);
  if (r.test) metrics["test"] = metrics_to_json(*r.test);
  j["metrics"] = metrics;
  j["seconds"] = r.seconds;
  return j;
}

EvalMetrics evaluate(const SsrModel& model, const Dataset& data) {
  if (data.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (!same_vocabulary(model.labels(), data.label_space)) {
    throw std::invalid_argument("evaluate: dataset label space does not match the checkpoint");
  }
  NoGradGuard no_grad;
  const Scenario scenario = model.scenario().scenario;
  std::vector<std::size_t> predicted, truth;
  std::vector<std::vector<std::size_t>> stroke_pred, stroke_truth;
  std::vector<std::vector<double>> exist_prob;
  std::vector<std::vector<std::uint8_t>> exist_truth;
  for (const auto& s : data.samples) {
    const Prediction p = model.predict(s);
    predicted.push_back(p.category);
    truth.push_back(s.category);
    if (scenario == Scenario::kLabelsFull && s.stroke_components) {
      stroke_pred.push_back(p.stroke_components);
      stroke_truth.push_back(*s.stroke_components);
    }
    if (scenario == Scenario::kPriorInfo) {
      exist_prob.push_back(p.existence_probs);
      exist_truth.push_back(model.labels().composition_vector(s.category));
    }
  }
  EvalMetrics m;
  m.samples = data.samples.size();
  m.acc_at_1 = acc_at_1(predicted, truth);
  if (!stroke_truth.empty()) m.c_metric = c_metric(stroke_pred, stroke_truth);
  if (!exist_truth.empty()) m.existence_accuracy = existence_accuracy(exist_prob, exist_truth);
  return m;
}

TrainResult train(SsrModel& model, const Dataset& train_set, const Dataset* test_set, const TrainSettings& settings,
                  const TrainCallbacks& callbacks) {
  if (train_set.samples.empty()) throw std::invalid_argument("train: empty training set");
  if (settings.batch_size == 0 || settings.epochs == 0) throw std::invalid_argument("train: zero epochs or batch");
  if (!same_vocabulary(model.labels(), train_set.label_space)) {
    throw std::invalid_argument("train: dataset label space does not match the model");
  }
  settings.adam.validate();

  std::ofstream metrics_log;
  if (!settings.output_dir.empty()) {
    std::filesystem::create_directories(settings.output_dir);
    metrics_log.open(settings.output_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_log) throw std::runtime_error("cannot open metrics log in " + settings.output_dir.string());
  }

  Rng shuffle_rng(settings.seed ^ 0x5eed5eed5eedULL);
  std::vector<std::size_t> order(train_set.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool need_train_eval =
      settings.eval_train || settings.stop_train_acc || settings.stop_train_c_metric || test_set == nullptr;

  TrainResult result;
  std::optional<std::pair<double, double>> best_rank;
  for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    LossSums sums;
    std::size_t skipped = 0;
    for (std::size_t start = 0; start < order.size(); start += settings.batch_size) {
      const std::size_t end = std::min(order.size(), start + settings.batch_size);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      const double scale = 1.0 / static_cast<double>(batch.size());
      // L1 depends only on the memory keys; one graph serves the whole batch.
      const Tensor key_loss = model.memory().key_loss();
      for (std::size_t idx : batch) {
        const Sketch& s = train_set.samples[idx];
        const ForwardResult fwd = model.forward(s);
        LossParts parts = model.losses(fwd, s, false);
        parts.l1 = key_loss;
        const Tensor total = total_loss(parts, model.scenario());
        const LossValues values = loss_values(parts, total);
        if (!std::isfinite(values.total)) abort_on_nan(settings, model, train_set, epoch, batch, idx, values);
        mul_scalar(total, scale).backward();
        sums.add(values);
        if (callbacks.on_step) callbacks.on_step(parts, total);
      }
      skipped = std::max(skipped, adam_step(model.params(), settings.adam).skipped);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.losses = sums.mean();
    if (need_train_eval) rec.train = evaluate(model, train_set);
    if (test_set) rec.test = evaluate(model, *test_set);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const EvalMetrics& select = rec.test ? *rec.test : *rec.train;
    const auto rank = rank_of(select);
    if (!best_rank || rank > *best_rank) {
      best_rank = rank;
      result.best_epoch = epoch;
      result.best = select;
      if (!settings.output_dir.empty()) {
        result.best_checkpoint = settings.output_dir / "best.ckpt";
        save_checkpoint(result.best_checkpoint, model,
                        {{"epoch", epoch}, {"metrics", metrics_to_json(select)}, {"run", settings.run_echo}});
      }
    }
    if (metrics_log.is_open()) metrics_log << epoch_to_json(rec).dump() << '\n' << std::flush;
    spdlog::info("epoch {:>3} loss {:.5f} train_acc {} test_acc {} ({:.2f}s{})", epoch, rec.losses.total,
                 rec.train ? fmt::format("{:.4f}", rec.train->acc_at_1) : "-",
                 rec.test ? fmt::format("{:.4f}", rec.test->acc_at_1) : "-", rec.seconds,
                 skipped ? fmt::format(", {} params without grad", skipped) : "");
    if (callbacks.on_epoch) callbacks.on_epoch(rec);
    result.history.push_back(std::move(rec));

    const auto& last = result.history.back();
    if (last.train && (settings.stop_train_acc || settings.stop_train_c_metric)) {
      const bool acc_ok = !settings.stop_train_acc || last.train->acc_at_1 >= *settings.stop_train_acc;
      const bool cm_ok = !settings.stop_train_c_metric || !last.train->c_metric ||
                         *last.train->c_metric >= *settings.stop_train_c_metric;
      if (acc_ok && cm_ok) {
        result.stopped_early = epoch < settings.epochs;
        break;
      }
    }
  }
  return result;
}

LoadedRun load_run_data(const RunConfig& config) {
  if (config.label_space.empty()) throw std::invalid_argument("label_space is required");
  LoadedRun run;
  run.labels = load_label_space(config.label_space);
  const std::size_t max_strokes = config.model_config().max_strokes;
  run.train = load_stroke_file(config.train_data, run.labels, max_strokes);
  if (!run.labels.has_composition()) {
    derive_composition(run.labels, run.train.samples);
    run.train.label_space = run.labels;
  }
  run.train.split = Split::kTrain;
  if (!config.test_data.empty()) {
    run.test = load_stroke_file(config.test_data, run.labels, max_strokes);
    run.test->label_space = run.labels;
    run.test->split = Split::kTest;
  }
  return run;
}

TrainSettings settings_from(const RunConfig& config) {
  TrainSettings s;
  s.epochs = config.resolved_epochs();
  s.batch_size = config.resolved_batch_size();
  s.adam = config.adam;
  s.seed = config.seed;
  s.output_dir = config.output_dir;
  s.stop_train_acc = config.stop_train_acc;
  s.stop_train_c_metric = config.stop_train_c_metric;
  s.run_echo = config.to_text();
  return s;
}

std::vector<SweepRow> ablation_rows() {
  using S = Scenario;
  using P = TokenPath;
  using F = FusionMode;
  return {
      {S::kCategoryOnly, P::kStroke, F::kConvex},    {S::kCategoryOnly, P::kStroke, F::kKeysOnly},
      {S::kCategoryOnly, P::kStroke, F::kStrokesOnly}, {S::kCategoryOnly, P::kComponent, F::kConvex},
      {S::kCategoryOnly, P::kComponent, F::kStrokesOnly}, {S::kPriorInfo, P::kComponent, F::kConvex},
      {S::kPriorInfo, P::kComponent, F::kStrokesOnly}, {S::kLabelsFull, P::kStroke, F::kConvex},
      {S::kLabelsFull, P::kStroke, F::kKeysOnly},    {S::kLabelsFull, P::kStroke, F::kStrokesOnly},
  };
}

std::vector<SweepResult> run_sweep(const RunConfig& config, const std::function<void(const SweepResult&)>& on_row) {
  const LoadedRun data = load_run_data(config);
  const std::vector<std::uint64_t> seeds =
      config.sweep_seeds.empty() ? std::vector<std::uint64_t>{config.seed} : config.sweep_seeds;
  const bool write = !config.output_dir.empty();
  std::ofstream jsonl, tsv;
  if (write) {
    std::filesystem::create_directories(config.output_dir);
    jsonl.open(config.output_dir / "sweep.jsonl", std::ios::trunc);
    tsv.open(config.output_dir / "sweep.tsv", std::ios::trunc);
    tsv << "scenario\ttoken_path\tfusion_mode\tseeds\tacc_at_1\tc_metric\texistence_accuracy\n";
  }

  std::vector<SweepResult> results;
  for (const SweepRow& row : ablation_rows()) {
    SweepResult r;
    r.row = row;
    r.seeds = seeds;
    const std::string tag = fmt::format("{}-{}-{}", to_string(row.scenario), to_string(row.path), to_string(row.fusion));
    double acc = 0, cm = 0, ex = 0;
    for (std::uint64_t seed : seeds) {
      RunConfig rc = config;
      rc.scenario = to_string(row.scenario);
      rc.token_path = to_string(row.path);
      rc.fusion_mode = to_string(row.fusion);
      rc.seed = seed;
      rc.output_dir = write ? config.output_dir / tag / fmt::format("seed{}", seed) : std::filesystem::path();
      SsrModel model(rc.model_config(), rc.scenario_config(), data.labels, seed);
      spdlog::info("sweep {} seed {}", tag, seed);
      const TrainResult tr = train(model, data.train, data.test ? &*data.test : nullptr, settings_from(rc));
      r.per_seed.push_back(tr.best);
      acc += tr.best.acc_at_1;
      if (tr.best.c_metric) cm += *tr.best.c_metric;
      if (tr.best.existence_accuracy) ex += *tr.best.existence_accuracy;
    }
    const double n = static_cast<double>(seeds.size());
    r.mean.samples = r.per_seed.front().samples;
    r.mean.acc_at_1 = acc / n;
    if (r.per_seed.front().c_metric) r.mean.c_metric = cm / n;
    if (r.per_seed.front().existence_accuracy) r.mean.existence_accuracy = ex / n;

    if (write) {
      json per_seed = json::array();
      for (const auto& m : r.per_seed) per_seed.push_back(metrics_to_json(m));
      jsonl << json{{"scenario", to_string(row.scenario)},
                    {"token_path", to_string(row.path)},
                    {"fusion_mode", to_string(row.fusion)},
                    {"seeds", seeds},
                    {"mean", metrics_to_json(r.mean)},
                    {"per_seed", per_seed}}
                   .dump()
            << '\n'
            << std::flush;
      auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string("-"); };
      tsv << fmt::format("{}\t{}\t{}\t{}\t{:.6f}\t{}\t{}\n", to_string(row.scenario), to_string(row.path),
                         to_string(row.fusion), seeds.size(), r.mean.acc_at_1, cell(r.mean.c_metric),
                         cell(r.mean.existence_accuracy))
          << std::flush;
    }
    if (on_row) on_row(r);
    results.push_back(std::move(r));
  }
  return results;
}

std::filesystem::path export_features(const SsrModel& model, const Dataset& data, const std::filesystem::path& out_dir) {
  if (!same_vocabulary(model.labels(), data.label_space)) {
    throw std::invalid_argument("export: dataset label space does not match the checkpoint");
  }
  std::filesystem::create_directories(out_dir);
  const auto path = out_dir / "features.tsv";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());

  auto join = [](std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{:.17g}", i ? "," : "", v[i]);
    return s;
  };

  NoGradGuard no_grad;
  out << "kind\tsample\tindex\thead\tpredicted\ttruth\tassignment\tfeatures\n";
  const bool use_segment_head = model.scenario().scenario == Scenario::kLabelsFull;
  const std::size_t k = model.labels().num_components();
  for (std::size_t si = 0; si < data.samples.size(); ++si) {
    const Sketch& s = data.samples[si];
    const ForwardResult fwd = model.forward(s);
    const Prediction p = model.predict(fwd);
    const std::size_t d = fwd.q.dim(1);
    for (std::size_t i = 0; i < s.num_strokes(); ++i) {
      const std::size_t assigned = p.assigned_components[i];
      const std::size_t predicted = use_segment_head ? p.stroke_components[i] : assigned;
      const std::string truth = s.stroke_components ? std::to_string((*s.stroke_components)[i]) : "";
      out << fmt::format("stroke\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", si, i, p.head_choice[i * k + assigned], predicted,
                         truth, join(p.assignment[i]), join(fwd.q.values().subspan(i * d, d)));
    }
  }
  const MemoryBank& bank = model.memory().bank();
  const std::size_t h = bank.heads(), d = bank.width();
  const auto keys = bank.keys().values();
  for (std::size_t j = 0; j < bank.components(); ++j)
    for (std::size_t hh = 0; hh < h; ++hh)
      out << fmt::format("key\t\t{}\t{}\t\t{}\t\t{}\n", j, hh, j, join(keys.subspan((j * h + hh) * d, d)));
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return path;
}

std::vector<FeatureRow> read_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, sep)) parts.push_back(cur);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
  };
  auto numbers = [&](const std::string& s) {
    std::vector<double> v;
    if (s.empty()) return v;
    for (const auto& p : split(s, ',')) v.push_back(std::stod(p));
    return v;
  };
  auto maybe = [](const std::string& s) -> std::optional<std::size_t> {
    if (s.empty()) return std::nullopt;
    return std::stoul(s);
  };

  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (++lineno == 1) continue;  // header
    const auto cols = split(line, '\t');
    if (cols.size() != 8) throw DataError(fmt::format("expected 8 columns, got {}", cols.size()), lineno);
    FeatureRow r;
    r.kind = cols[0];
    r.sample = maybe(cols[1]);
    r.index = std::stoul(cols[2]);
    r.head = std::stoul(cols[3]);
    r.predicted = maybe(cols[4]);
    r.truth = maybe(cols[5]);
    r.assignment = numbers(cols[6]);
    r.features = numbers(cols[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ssr

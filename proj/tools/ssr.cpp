#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ssr/checkpoint.hpp"
#include "ssr/run_config.hpp"
#include "ssr/service.hpp"
#include "ssr/synth.hpp"
#include "ssr/trainer.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_train(const fs::path& config_path) {
  const ssr::RunConfig config = ssr::load_run_config(config_path);
  config.validate();
  const ssr::LoadedRun data = ssr::load_run_data(config);
  fs::create_directories(config.output_dir);
  std::ofstream(config.output_dir / "run_config.txt") << config.to_text();
  if (!data.labels.composition.empty()) ssr::save_label_space(config.output_dir / "labels.json", data.labels);

  ssr::SsrModel model(config.model_config(), config.scenario_config(), data.labels, config.seed);
  spdlog::info("training {} ({} parameters) on {} samples", ssr::to_string(config.scenario_config().scenario),
               model.params().scalar_count(), data.train.samples.size());
  const ssr::TrainResult r =
      ssr::train(model, data.train, data.test ? &*data.test : nullptr, ssr::settings_from(config));
  std::cout << nlohmann::json{{"best_epoch", r.best_epoch},
                              {"best", ssr::metrics_to_json(r.best)},
                              {"checkpoint", r.best_checkpoint.string()},
                              {"epochs_run", r.history.size()}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data_path) {
  const ssr::LoadedCheckpoint ckpt = ssr::load_checkpoint(checkpoint);
  ssr::Dataset data = ssr::load_stroke_file(data_path, ckpt.model.labels(), ckpt.model.model_config().max_strokes);
  std::cout << ssr::metrics_to_json(ssr::evaluate(ckpt.model, data)).dump(2) << '\n';
  return 0;
}

int cmd_sweep(const fs::path& config_path) {
  const ssr::RunConfig config = ssr::load_run_config(config_path);
  config.validate();
  ssr::run_sweep(config, [](const ssr::SweepResult& r) {
    std::cout << fmt::format("{:<14} {:<10} {:<13} acc@1 {:.4f}", ssr::to_string(r.row.scenario),
                             ssr::to_string(r.row.path), ssr::to_string(r.row.fusion), r.mean.acc_at_1);
    if (r.mean.c_metric) std::cout << fmt::format("  c-metric {:.4f}", *r.mean.c_metric);
    if (r.mean.existence_accuracy) std::cout << fmt::format("  existence {:.4f}", *r.mean.existence_accuracy);
    std::cout << std::endl;
  });
  return 0;
}

int cmd_export(const fs::path& checkpoint, const fs::path& data_path, const fs::path& out_dir) {
  const ssr::LoadedCheckpoint ckpt = ssr::load_checkpoint(checkpoint);
  ssr::Dataset data = ssr::load_stroke_file(data_path, ckpt.model.labels(), ckpt.model.model_config().max_strokes);
  std::cout << ssr::export_features(ckpt.model, data, out_dir).string() << '\n';
  return 0;
}

int cmd_synth(const fs::path& spec_path, std::uint64_t seed, const fs::path& out) {
  const ssr::SynthSpec spec = ssr::load_synth_spec(spec_path);
  const ssr::Dataset data = ssr::synthesize_dataset(spec, seed);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  ssr::save_stroke_file(out, data);
  const fs::path stem = out.parent_path() / out.stem();
  ssr::save_label_space(stem.string() + ".labels.json", data.label_space);
  std::cout << fmt::format("{} samples -> {}\n", data.samples.size(), out.string());
  if (spec.train_per_category) {
    const auto [train, test] = ssr::split_per_category(data, *spec.train_per_category);
    ssr::save_stroke_file(stem.string() + ".train.jsonl", train);
    ssr::save_stroke_file(stem.string() + ".test.jsonl", test);
    std::cout << fmt::format("{} train / {} test -> {}.{{train,test}}.jsonl\n", train.samples.size(),
                             test.samples.size(), stem.string());
  }
  return 0;
}

int cmd_serve(const fs::path& checkpoint, const std::string& host, int port) {
  // Block termination signals before starting threads so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const ssr::RecognitionService service(ssr::load_checkpoint(checkpoint));
  ssr::HttpServer server(service);
  const int bound = server.bind(host, port);
  spdlog::info("serving {} on http://{}:{}", checkpoint.string(), host, bound);
  std::thread worker([&server] { server.listen(); });
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {}, shutting down", sig);
  server.stop();
  worker.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured sketch recognition: train, evaluate, sweep, export, synthesize, serve"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  fs::path config, checkpoint, data, out, spec;
  std::uint64_t seed = 0;
  std::string host = "127.0.0.1";
  int port = 8080;

  auto* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", config, "run config file")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a stroke file");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data)->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "run the scenario/feature ablation matrix");
  sweep->add_option("--config", config, "run config file")->required()->check(CLI::ExistingFile);

  auto* exp = app.add_subcommand("export", "dump stroke features, assignments and memory keys");
  exp->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  exp->add_option("--data", data)->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out, "output directory")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic stroke dataset");
  synth->add_option("--spec", spec, "synth spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", seed)->required();
  synth->add_option("--out", out, "output stroke file")->required();

  auto* serve = app.add_subcommand("serve", "serve /healthz, /model and /recognize over HTTP");
  serve->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train) return cmd_train(config);
    if (*eval) return cmd_eval(checkpoint, data);
    if (*sweep) return cmd_sweep(config);
    if (*exp) return cmd_export(checkpoint, data, out);
    if (*synth) return cmd_synth(spec, seed, out);
    if (*serve) return cmd_serve(checkpoint, host, port);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

// Copyright 2026 The tinytl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line front end: analyze, train, gradcheck, search, synth, sweep.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tinytl/arch.hpp"
#include "tinytl/elastic.hpp"
#include "tinytl/errors.hpp"
#include "tinytl/gradcheck.hpp"
#include "tinytl/io/arch_json.hpp"
#include "tinytl/io/dataset_file.hpp"
#include "tinytl/io/reports.hpp"
#include "tinytl/memory_model.hpp"
#include "tinytl/model.hpp"
#include "tinytl/pipeline.hpp"
#include "tinytl/policy.hpp"
#include "tinytl/train.hpp"

namespace {

namespace fs = std::filesystem;
using namespace tinytl;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_or_print(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    io::write_text(out, text);
  }
}

template <typename Report>
void emit(const Report& report, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << io::to_json(report);
  } else {
    io::emit_report(report, io::format_for(out), out);
  }
}

struct AnalyzeArgs {
  std::string arch, policy = "tinytl-lb", out;
  int batch = 8;
  int resolution = 224;
  bool no_lite = false;
};

int run_analyze(const AnalyzeArgs& a) {
  const ArchitectureSpec arch = io::load_arch(a.arch);
  const FineTunePolicy policy = FineTunePolicy::parse(a.policy);
  CostReport r = cost_report(arch, policy, a.batch, a.resolution);
  if (a.no_lite) r.memory = model_footprint(arch, policy, a.batch, a.resolution, false);
  emit(r, a.out);
  return 0;
}

struct TrainArgs {
  std::string arch, policy = "tinytl-lb", data, eval, out;
  int epochs = 50;
  int batch = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool quantize = false;
  bool no_lite = false;
};

int run_train(const TrainArgs& a) {
  const ArchitectureSpec arch = io::load_arch(a.arch);
  const Dataset data = io::load_dataset(a.data);
  Model model = build_backbone<float>(arch, data.n_classes, InitStrategy::kRandomZeroScale, a.seed);
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch = a.batch;
  cfg.lr0 = a.lr;
  cfg.seed = a.seed;
  cfg.quantize_frozen = a.quantize;
  cfg.forward.lite = !a.no_lite;
  Dataset eval;
  if (!a.eval.empty()) eval = io::load_dataset(a.eval);
  const TrainReport r = train(model, resize_dataset(data, arch.resolution),
                              FineTunePolicy::parse(a.policy), cfg,
                              a.eval.empty() ? nullptr : &eval);
  emit(r, a.out);
  std::fprintf(stderr, "final loss %.6f  accuracy %.4f  peak saved %llu bytes\n", r.final_loss,
               r.final_acc, static_cast<unsigned long long>(r.peak_saved_bytes));
  return 0;
}

struct GradcheckArgs {
  std::string arch, policy = "ft-full";
  double eps = 1e-3;
  std::uint64_t seed = 0;
  int batch = 2;
  int resolution = 32;
  int samples = 4;
  double tolerance = 1e-4;
  double lite_scale = 0.5;
};

// Analytic gradients of the 32-bit model against central differences on a
// 64-bit copy, for a cross-entropy loss on random inputs and labels. A
// tensor that fails at --eps is retried with steps 10x smaller down to 1e-8:
// errors from a step crossing a ReLU kink shrink with the step, real
// gradient errors do not.
int run_gradcheck(const GradcheckArgs& a) {
  ArchitectureSpec arch = io::load_arch(a.arch);
  const Model model = build_backbone<float>(arch, arch.n_classes, InitStrategy::kRandomZeroScale,
                                            a.seed);
  // A zero lite scale puts every lite ReLU input exactly on its kink.
  for (const auto& p : model.parameters()) {
    if (p->group == ParamGroup::kLite && p->name.ends_with(".gn.scale")) p->value.fill(static_cast<float>(a.lite_scale));
  }
  const FineTunePolicy policy = FineTunePolicy::parse(a.policy);
  apply_policy(model, policy);
  std::mt19937_64 rng(a.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor64 x(Shape{a.batch, arch.stem.in_ch, a.resolution, a.resolution});
  for (auto& v : x.data()) v = gauss(rng);
  std::vector<int> labels(static_cast<std::size_t>(a.batch));
  for (int& l : labels) l = static_cast<int>(rng() % static_cast<std::uint64_t>(arch.n_classes));

  Tape<float> tape;
  const Var<float> logits = model.forward(x.cast<float>(), &tape);
  Tensor grad;
  softmax_cross_entropy<float>(logits.value, labels, &grad);
  const GradientMap analytic = to_gradient_map(backward_pass(tape, logits, grad));

  const Model64 shadow = model.cast<double>();
  auto loss = [&] {
    return softmax_cross_entropy<double>(shadow.forward(x, nullptr).value, labels, nullptr);
  };
  FiniteDiffOptions opt;
  opt.norm = ErrorNorm::kPerTensor;
  opt.max_scalars_per_param = static_cast<std::size_t>(a.samples);
  opt.seed = a.seed;

  FiniteDiffResult worst;
  std::size_t checked = 0;
  int refined = 0;
  for (const auto& p : shadow.parameters()) {
    if (!p->trainable) continue;
    const std::vector<ParamPtr<double>> one{p};
    FiniteDiffResult r;
    for (opt.eps = a.eps;; opt.eps /= 10.0) {
      r = finite_diff_check<double>(loss, one, analytic, opt);
      if (r.max_rel_error < a.tolerance || opt.eps / 10.0 < 1e-8) break;
      ++refined;
    }
    checked += r.checked;
    if (r.max_rel_error >= worst.max_rel_error) worst = r;
  }
  const bool ok = worst.max_rel_error < a.tolerance;
  std::printf("policy %s  checked %zu  refined %d  max_rel_error %.3e  worst %s[%zu] analytic %.6e numeric %.6e  %s\n",
              policy.name().c_str(), checked, refined, worst.max_rel_error,
              worst.worst_param.c_str(), worst.worst_index, worst.worst_analytic,
              worst.worst_numeric, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

struct SearchArgs {
  std::string space, data, out;
  int pairs = 500;
  int population = 100;
  int generations = 30;
  std::uint64_t seed = 0;
  int phase1_epochs = 50;
  int final_epochs = 50;
  int batch = 8;
  double lr = 1e-3;
};

int run_search(const SearchArgs& a, const CLI::App& cmd) {
  io::SpaceFile file = io::load_space(a.space);
  const Dataset data = io::load_dataset(a.data);
  PipelineConfig cfg;
  cfg.search = file.search;
  if (cmd.count("--population") != 0) cfg.search.population = a.population;
  if (cmd.count("--generations") != 0) cfg.search.generations = a.generations;
  cfg.search.seed = a.seed;
  cfg.n_pairs = a.pairs;
  cfg.seed = a.seed;
  cfg.phase1_epochs = a.phase1_epochs;
  cfg.final_epochs = a.final_epochs;
  cfg.batch = a.batch;
  cfg.lr = a.lr;
  cfg.predictor.seed = a.seed;
  if (file.space.n_classes != data.n_classes) {
    throw SpecError("search: space has " + std::to_string(file.space.n_classes) +
                    " classes but the dataset has " + std::to_string(data.n_classes));
  }
  Supernet supernet = build_supernet(file.space, InitStrategy::kRandomZeroScale, a.seed);
  const PipelineResult r = adapt_pipeline(supernet, data, cfg);
  write_or_print(io::to_json(r, file.space), a.out);
  std::fprintf(stderr, "best %s  accuracy %.4f\n", r.best.str().c_str(), r.final_report.final_acc);
  return 0;
}

struct SynthArgs {
  std::string out, task = "orientation";
  int classes = 4;
  int per_class = 64;
  int size = 32;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  io::SynthSpec s;
  s.task = a.task == "period" ? io::SynthTask::kPeriod : io::SynthTask::kOrientation;
  s.n_classes = a.classes;
  s.per_class = a.per_class;
  s.size = a.size;
  s.noise = a.noise;
  s.seed = a.seed;
  io::save_dataset(io::synth_dataset(s), a.out);
  return 0;
}

struct SweepArgs {
  std::string arch, policies = "ft-full,ft-last,ft-norm-last,tinytl-b,tinytl-l,tinytl-lb";
  std::string resolutions = "128,160,192,224", out;
  int batch = 8;
};

int run_sweep(const SweepArgs& a) {
  const ArchitectureSpec arch = io::load_arch(a.arch);
  std::vector<CostReport> rows;
  for (const std::string& p : split_list(a.policies)) {
    const FineTunePolicy policy = FineTunePolicy::parse(p);
    for (const std::string& r : split_list(a.resolutions)) {
      rows.push_back(cost_report(arch, policy, a.batch, std::stoi(r)));
    }
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << io::to_csv(rows);
  } else {
    io::emit_report(rows, io::format_for(a.out), a.out);
  }
  return 0;
}

const std::vector<std::string> kPolicies{"ft-full",  "ft-last",  "ft-norm-last",
                                         "tinytl-b", "tinytl-l", "tinytl-lb"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tinytl: memory-efficient on-device transfer learning"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Analytic memory and MAC report");
  c_analyze->add_option("--arch", analyze.arch, "Architecture JSON")->required()->check(CLI::ExistingFile);
  c_analyze->add_option("--policy", analyze.policy)->check(CLI::IsMember(kPolicies));
  c_analyze->add_option("--batch", analyze.batch)->check(CLI::PositiveNumber);
  c_analyze->add_option("--resolution", analyze.resolution)->check(CLI::PositiveNumber);
  c_analyze->add_option("--out", analyze.out, "Report path (.json or .csv); stdout when omitted");
  c_analyze->add_flag("--no-lite", analyze.no_lite, "Drop lite branches from the graph");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Fine-tune a model on a dataset file");
  c_train->add_option("--arch", tr.arch)->required()->check(CLI::ExistingFile);
  c_train->add_option("--policy", tr.policy)->check(CLI::IsMember(kPolicies));
  c_train->add_option("--data", tr.data)->required()->check(CLI::ExistingFile);
  c_train->add_option("--eval", tr.eval, "Held-out dataset file")->check(CLI::ExistingFile);
  c_train->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  c_train->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  c_train->add_option("--lr", tr.lr)->required();
  c_train->add_option("--seed", tr.seed);
  c_train->add_option("--out", tr.out);
  c_train->add_flag("--quantize-frozen", tr.quantize, "8-bit frozen conv weights");
  c_train->add_flag("--no-lite", tr.no_lite, "Drop lite branches from the graph");

  GradcheckArgs gc;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  c_grad->add_option("--arch", gc.arch)->required()->check(CLI::ExistingFile);
  c_grad->add_option("--policy", gc.policy)->check(CLI::IsMember(kPolicies));
  c_grad->add_option("--eps", gc.eps)->check(CLI::PositiveNumber);
  c_grad->add_option("--seed", gc.seed);
  c_grad->add_option("--batch", gc.batch)->check(CLI::PositiveNumber);
  c_grad->add_option("--resolution", gc.resolution)->check(CLI::PositiveNumber);
  c_grad->add_option("--samples", gc.samples, "Scalars checked per tensor (0 = all)");
  c_grad->add_option("--tolerance", gc.tolerance);
  c_grad->add_option("--lite-scale", gc.lite_scale, "Lite norm scale used during the check");

  SearchArgs se;
  auto* c_search = app.add_subcommand("search", "Supernet fine-tune, predictor search, final fine-tune");
  c_search->add_option("--space", se.space)->required()->check(CLI::ExistingFile);
  c_search->add_option("--data", se.data)->required()->check(CLI::ExistingFile);
  c_search->add_option("--pairs", se.pairs)->check(CLI::NonNegativeNumber);
  c_search->add_option("--population", se.population);
  c_search->add_option("--generations", se.generations);
  c_search->add_option("--seed", se.seed);
  c_search->add_option("--phase1-epochs", se.phase1_epochs);
  c_search->add_option("--final-epochs", se.final_epochs);
  c_search->add_option("--batch", se.batch)->check(CLI::PositiveNumber);
  c_search->add_option("--lr", se.lr);
  c_search->add_option("--out", se.out);

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic dataset file");
  c_synth->add_option("--classes", sy.classes)->check(CLI::PositiveNumber);
  c_synth->add_option("--per-class", sy.per_class)->check(CLI::PositiveNumber);
  c_synth->add_option("--size", sy.size)->check(CLI::PositiveNumber);
  c_synth->add_option("--noise", sy.noise)->check(CLI::NonNegativeNumber);
  c_synth->add_option("--task", sy.task)->check(CLI::IsMember({"orientation", "period"}));
  c_synth->add_option("--seed", sy.seed);
  c_synth->add_option("--out", sy.out)->required();

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "Memory and MAC over policies and resolutions");
  c_sweep->add_option("--arch", sw.arch)->required()->check(CLI::ExistingFile);
  c_sweep->add_option("--policies", sw.policies, "Comma-separated policy names");
  c_sweep->add_option("--resolutions", sw.resolutions, "Comma-separated resolutions");
  c_sweep->add_option("--batch", sw.batch)->check(CLI::PositiveNumber);
  c_sweep->add_option("--out", sw.out);

  CLI11_PARSE(app, argc, argv);
  try {
    if (c_analyze->parsed()) return run_analyze(analyze);
    if (c_train->parsed()) return run_train(tr);
    if (c_grad->parsed()) return run_gradcheck(gc);
    if (c_search->parsed()) return run_search(se, *c_search);
    if (c_synth->parsed()) return run_synth(sy);
    if (c_sweep->parsed()) return run_sweep(sw);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

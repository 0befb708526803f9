// SPDX-License-Identifier: Apache-2.0
//
// mpvqa: descriptors, dataset generation, statistics, evaluation and the MoE
// reference checks behind one binary.
#include "mpvqa/checkpoint.hpp"
#include "mpvqa/conform.hpp"
#include "mpvqa/error.hpp"
#include "mpvqa/eval.hpp"
#include "mpvqa/file_util.hpp"
#include "mpvqa/fixture.hpp"
#include "mpvqa/nifti.hpp"
#include "mpvqa/qagen.hpp"
#include "mpvqa/regions.hpp"
#include "mpvqa/templates.hpp"
#include "mpvqa/train.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#ifndef MPVQA_VERSION
#define MPVQA_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace mpvqa;

namespace {

struct Options {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string data_dir;
  std::string atlas;
  std::string region_map;
  std::string labels_config;
  std::string bank;
  std::string descriptors;
  std::string in;
  std::string out;
  std::string gold;
  std::string pred;
  std::string kappa;
  std::string checkpoint;
  std::string report;
  double spacing = 1.0;
  std::size_t min_overlap = kDefaultMinOverlapVoxels;
  unsigned workers = 1;
  int resamples = kDefaultBootstrapResamples;
  int steps = 2000;
  double lr = 0.5;
  int experts = 16;
  std::string granularity;
  std::size_t stub_studies = 0;
  std::string stub_labels;
};

void stanza(const CLI::App& sub, const Options& o) {
  std::ostringstream cfg;
  cfg << sub.get_name() << '\n' << sub.config_to_str(true, false);
  std::fprintf(stderr, "# mpvqa %s seed=%llu config=%016llx\n", MPVQA_VERSION,
              static_cast<unsigned long long>(o.seed),
              static_cast<unsigned long long>(fnv1a64(cfg.str())));
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

std::map<int, std::string> load_labels(const Options& o) {
  if (o.labels_config.empty()) return glioma_labels();
  require_file(o.labels_config, "labels-config");
  auto labels = parse_label_map(read_text_file(o.labels_config));
  if (labels.empty()) throw ConfigError("labels config lists no labels");
  return labels;
}

const TemplateBank& load_bank(const Options& o, TemplateBank& storage) {
  if (o.bank.empty()) return canonical_bank();
  require_file(o.bank, "bank");
  storage = parse_template_bank(read_text_file(o.bank), o.bank);
  return storage;
}

Atlas load_atlas(const Options& o) {
  require_file(o.atlas, "atlas");
  require_file(o.region_map, "region-map");
  Atlas atlas;
  atlas.labels = LabelMask(read_nifti(o.atlas));
  atlas.region_map = parse_label_map(read_text_file(o.region_map));
  atlas.provenance = o.atlas;
  atlas.validate();
  return atlas;
}

std::string data_dir(const Options& o) {
  if (!o.data_dir.empty()) return o.data_dir;
  if (const char* env = std::getenv("MPVQA_DATA_DIR")) return env;
  throw ConfigError("missing --data-dir (or MPVQA_DATA_DIR)");
}

struct Failure {
  std::string study;
  int error_class;
  std::string message;
};

// Descriptors for every study directory, in sorted directory order.
std::vector<TaskDescriptors> describe_all(const Options& o, std::vector<Failure>& failures) {
  const fs::path root = data_dir(o);
  if (!fs::is_directory(root)) throw ConfigError("data dir not found: " + root.string());
  const auto labels = load_labels(o);
  Atlas atlas = load_atlas(o);
  // The atlas is resampled like the studies so both live on the working grid.
  atlas.labels = LabelMask(conform_to_ras(atlas.labels.volume(), {o.spacing, o.spacing, o.spacing}));
  DescriptorConfig cfg{labels, o.min_overlap};

  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ConfigError("no study directories under " + root.string());

  std::vector<std::vector<TaskDescriptors>> per(dirs.size());
  std::vector<std::optional<Failure>> fail(dirs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < dirs.size(); i = next++) {
      try {
        const StudyInput study = load_study(dirs[i], {o.spacing, o.spacing, o.spacing});
        per[i] = compute_descriptors(study, atlas, cfg);
      } catch (const Error& e) {
        fail[i] = Failure{dirs[i].filename().string(), static_cast<int>(e.error_class()), e.what()};
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::max(1u, o.workers); ++w) pool.emplace_back(work);
  }
  std::vector<TaskDescriptors> out;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if (fail[i]) {
      failures.push_back(*fail[i]);
      continue;
    }
    for (auto& d : per[i]) out.push_back(std::move(d));
  }
  return out;
}

void write_failures(const Options& o, const std::vector<Failure>& failures) {
  for (const auto& f : failures) std::fprintf(stderr, "skipped %s: %s\n", f.study.c_str(), f.message.c_str());
  if (o.report.empty()) return;
  ojson j;
  j["schema_version"] = kSchemaVersion;
  auto arr = ojson::array();
  for (const auto& f : failures) arr.push_back({{"study_id", f.study}, {"exit_class", f.error_class}, {"error", f.message}});
  j["failures"] = arr;
  write_file_atomic(o.report, j.dump(2) + "\n");
}

std::string descriptors_jsonl(const std::vector<TaskDescriptors>& ds) {
  std::string s;
  for (const auto& d : ds) s += descriptor_to_json(d).dump() + "\n";
  return s;
}

std::vector<TaskDescriptors> read_descriptors(const std::string& path) {
  require_file(path, "descriptors");
  std::vector<TaskDescriptors> out;
  for (const auto& j : parse_jsonl(read_text_file(path))) out.push_back(descriptor_from_json(j));
  return out;
}

void need_seed(const Options& o) {
  if (!o.seed_set) throw ConfigError("--seed is required for this command");
}

void need_out(const Options& o) {
  if (o.out.empty()) throw ConfigError("missing --out");
}

int cmd_describe(const Options& o) {
  need_out(o);
  std::vector<Failure> failures;
  const auto ds = describe_all(o, failures);
  write_file_atomic(o.out, descriptors_jsonl(ds));
  write_failures(o, failures);
  std::printf("descriptors: %zu (skipped studies: %zu)\n", ds.size(), failures.size());
  return 0;
}

int cmd_stubs(const Options& o) {
  need_seed(o);
  need_out(o);
  if (o.stub_studies == 0) throw ConfigError("--studies must be positive");
  std::vector<std::string> labels;
  std::stringstream ss(o.stub_labels);
  for (std::string l; std::getline(ss, l, ',');) {
    if (!l.empty()) labels.push_back(l);
  }
  if (labels.empty()) {
    for (const auto& [v, name] : glioma_labels()) labels.push_back(name);
  }
  const auto ds = synthetic_descriptors(o.stub_studies, labels, o.seed);
  write_file_atomic(o.out, descriptors_jsonl(ds));
  std::printf("descriptor stubs: %zu\n", ds.size());
  return 0;
}

int cmd_generate(const Options& o) {
  need_seed(o);
  need_out(o);
  TemplateBank storage;
  const TemplateBank& bank = load_bank(o, storage);
  std::vector<TaskDescriptors> ds;
  std::vector<Failure> failures;
  if (!o.descriptors.empty()) ds = read_descriptors(o.descriptors);
  else ds = describe_all(o, failures);
  const auto records = generate_records(ds, bank, o.seed, o.workers);
  write_file_atomic(o.out, to_jsonl(records));
  write_failures(o, failures);
  std::printf("records: %zu (descriptors: %zu, skipped studies: %zu)\n", records.size(), ds.size(),
              failures.size());
  return 0;
}

int cmd_stats(const Options& o) {
  require_file(o.in, "in");
  const auto records = records_from_jsonl(read_text_file(o.in));
  const std::string csv = stats_csv(compute_stats(records));
  if (o.out.empty()) std::fputs(csv.c_str(), stdout);
  else write_file_atomic(o.out, csv);
  return 0;
}

int cmd_split(const Options& o) {
  need_seed(o);
  require_file(o.in, "in");
  std::vector<std::string> ids;
  for (const auto& j : parse_jsonl(read_text_file(o.in))) ids.push_back(j.at("study_id").get<std::string>());
  const auto splits = split_dataset(ids, o.seed);
  std::string csv = "study_id,split\n";
  std::array<std::size_t, 3> counts{};
  for (const auto& [id, s] : splits) {
    csv += id + "," + std::string(to_string(s)) + "\n";
    ++counts[static_cast<std::size_t>(s)];
  }
  if (o.out.empty()) std::fputs(csv.c_str(), stdout);
  else write_file_atomic(o.out, csv);
  std::fprintf(stderr, "train %zu, val %zu, test %zu studies\n", counts[0], counts[1], counts[2]);
  return 0;
}

int cmd_eval(const Options& o) {
  require_file(o.gold, "gold");
  require_file(o.pred, "pred");
  need_out(o);
  const auto gold = records_from_jsonl(read_text_file(o.gold));
  const auto preds = predictions_from_jsonl(read_text_file(o.pred));
  const auto aligned = align_predictions(gold, preds);
  std::vector<GoldValues> golds;
  for (const auto& r : gold) golds.push_back(r.gold);
  const MetricsReport report = evaluate(aligned, golds, o.resamples, o.seed, o.workers);
  ojson j = report_to_json(report);
  if (!o.kappa.empty()) {
    require_file(o.kappa, "kappa");
    const auto other = align_predictions(gold, predictions_from_jsonl(read_text_file(o.kappa)));
    ojson k;
    auto add = [&](const char* name, auto get) {
      std::vector<std::string> a, b;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        a.push_back(get(aligned[i]));
        b.push_back(get(other[i]));
      }
      const KappaResult r = cohen_kappa(a, b);
      k[name] = {{"kappa", r.kappa}, {"kappa_x100", r.kappa_x100}, {"degenerate", r.degenerate}};
    };
    add("volume", [](const GoldValues& g) { return g.volume; });
    add("region", [](const GoldValues& g) { return join_regions(g.regions); });
    add("shape", [](const GoldValues& g) { return g.shape; });
    add("spread", [](const GoldValues& g) { return g.spread; });
    add("out_of_scope", [](const GoldValues& g) { return std::string(g.out_of_scope ? "yes" : "no"); });
    j["kappa"] = k;
  }
  write_file_atomic(o.out, j.dump(2) + "\n");
  auto show = [](const char* name, const TaskMetric& m) {
    if (m.accuracy) std::printf("%-13s %6.1f +- %4.1f  (n=%zu)\n", name, *m.accuracy, m.std, m.n);
    else std::printf("%-13s    n/a          (n=0)\n", name);
  };
  show("volume", report.volume);
  show("region", report.region);
  show("shape", report.shape);
  show("spread", report.spread);
  show("out_of_scope", report.out_of_scope);
  if (report.mean) std::printf("%-13s %6.1f\n", "mean", *report.mean);
  return 0;
}

MoEConfig cli_config(const Options& o) {
  MoEConfig c;
  c.n_experts = o.experts;
  if (!o.granularity.empty()) {
    std::stringstream ss(o.granularity);
    for (std::string g; std::getline(ss, g, ',');) c.granularity.push_back(parse_granularity(g));
  }
  c.validate();
  return c;
}

int cmd_moe_check(const Options& o) {
  struct Row {
    std::string check;
    double value;
    double tolerance;
    bool pass;
  };
  std::vector<Row> rows;
  CounterRng rng(o.seed, {"moe-check"});

  // Routing simplex and sigmoid range on the default configuration.
  MoEConfig big = cli_config(o);
  big.n_tokens = 4;
  const MoEParams params = MoEParams::init(big, o.seed);
  double simplex = 0, low_min = 1, low_max = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Sample s = random_sample(big, rng);
    RoutingTrace tr;
    moe_forward(s.tokens, s.prompt, params, nullptr, &tr);
    simplex = std::max(simplex, std::abs(tr.pi_high.sum() - 1.0));
    for (const auto& p : tr.pi_low) {
      low_min = std::min(low_min, p.minCoeff());
      low_max = std::max(low_max, p.maxCoeff());
    }
  }
  rows.push_back({"pi_high sum deviation", simplex, 1e-6, simplex <= 1e-6});
  rows.push_back({"pi_low inside (0,1)", std::max(-low_min, low_max - 1.0), 0.0, low_min > 0 && low_max < 1});

  // Fused token count does not depend on the modality count.
  bool tokens_ok = true;
  for (int nm : {1, 2, 4, 8}) {
    MoEConfig c = big;
    c.n_modalities = nm;
    c.n_experts = 2;
    c.granularity.clear();
    const MoEParams p = MoEParams::init(c, o.seed);
    const Sample s = random_sample(c, rng);
    tokens_ok = tokens_ok && moe_forward(s.tokens, s.prompt, p).rows() == c.n_tokens;
  }
  rows.push_back({"fused rows == N_I", tokens_ok ? 0.0 : 1.0, 0.0, tokens_ok});

  // Finite differences on small configurations.
  MoEConfig small;
  small.n_experts = 2;
  small.n_modalities = 2;
  small.n_tokens = 3;
  small.d_image = 4;
  small.d_text = 5;
  small.hidden = 3;
  const Model model = Model::init(small, o.seed);
  std::vector<Sample> samples{random_sample(small, rng), random_sample(small, rng)};
  double worst = 0;
  std::string worst_name;
  for (const auto& g : gradient_check(model, samples, 1e-5)) {
    if (g.relative_error > worst) {
      worst = g.relative_error;
      worst_name = g.name;
    }
  }
  rows.push_back({"gradient rel. error (" + worst_name + ")", worst, 1e-4, worst < 1e-4});

  bool all = true;
  std::printf("%-44s %12s %10s  %s\n", "check", "max error", "tolerance", "result");
  for (const auto& r : rows) {
    std::printf("%-44s %12.3e %10.1e  %s\n", r.check.c_str(), r.value, r.tolerance, r.pass ? "ok" : "FAIL");
    all = all && r.pass;
  }
  return all ? 0 : 4;
}

int cmd_moe_demo(const Options& o) {
  need_seed(o);
  need_out(o);
  const ToyFixture fx = make_toy_fixture(o.seed);
  TrainOptions opts;
  opts.steps = o.steps;
  opts.learning_rate = o.lr;
  opts.workers = o.workers;
  const TrainResult r = train_toy(fx.train, Model::init(fx.config, o.seed), opts);
  std::ostringstream csv;
  csv << "step,loss\n" << std::setprecision(12);
  for (std::size_t i = 0; i < r.loss_curve.size(); ++i) csv << i << ',' << r.loss_curve[i] << '\n';
  write_file_atomic(o.out, csv.str());
  if (!o.checkpoint.empty()) save_checkpoint(o.checkpoint, r.model, o.seed);
  const TaskAccuracies a = evaluate_accuracy(r.model, fx.test);
  std::printf("loss %.4f -> %.4f over %d steps\n", r.loss_curve.front(), r.loss_curve.back(), o.steps);
  std::printf("held-out accuracy: volume %.1f region %.1f shape %.1f spread %.1f oos %.1f\n", a.volume,
              a.region, a.shape, a.spread, a.oos);
  return 0;
}

int cmd_heatmap(const Options& o) {
  need_out(o);
  Model model;
  if (!o.checkpoint.empty()) {
    require_file(o.checkpoint, "checkpoint");
    model = load_checkpoint(o.checkpoint);
  } else {
    model = Model::init(cli_config(o), o.seed);
  }
  const auto labels = load_labels(o);
  const TemplateBank& bank = canonical_bank();
  std::vector<Eigen::VectorXd> vectors;
  std::vector<std::string> names;
  for (const auto& [value, label] : labels) {
    for (std::size_t i : bank.of_kind(TemplateKind::multitask)) {
      const Template& t = bank.templates()[i];
      const QAPair qa = render(t, absent_descriptor("prompt", label));
      vectors.push_back(high_route(hash_embed(qa.question, model.moe.config.d_text), model.moe));
      names.push_back(label + " | " + format_task_set(t.tasks));
    }
  }
  const Heatmap h = routing_heatmap(vectors);
  write_file_atomic(o.out, heatmap_csv(h, names));
  const auto flat = std::count(h.zero_variance.begin(), h.zero_variance.end(), true);
  std::printf("prompts: %zu (zero-variance routing vectors: %td)\n", names.size(), flat);
  return 0;
}

int cmd_make_fixture(const Options& o) {
  need_out(o);
  const FixtureLayout l = make_fixture(o.out);
  std::printf("studies: %s\natlas: %s\nregion map: %s\nlabels: %s\n", l.studies.c_str(), l.atlas.c_str(),
              l.region_map.c_str(), l.labels.c_str());
  return 0;
}

int cmd_dump_bank(const Options& o) {
  const std::string text(canonical_bank_text());
  if (o.out.empty()) std::fputs(text.c_str(), stdout);
  else write_file_atomic(o.out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation-derived VQA data sets and a hierarchical MoE reference"};
  app.set_version_flag("--version", MPVQA_VERSION);
  app.require_subcommand(1);
  Options o;

  auto seed_opt = [&](CLI::App* s) {
    s->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) {
      o.seed = v;
      o.seed_set = true;
    }, "Random seed");
  };
  auto workers_opt = [&](CLI::App* s) {
    s->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto study_opts = [&](CLI::App* s) {
    s->add_option("--data-dir", o.data_dir, "Directory of study folders (default $MPVQA_DATA_DIR)");
    s->add_option("--atlas", o.atlas, "Atlas label volume (NIfTI)");
    s->add_option("--region-map", o.region_map, "Atlas label to region name map");
    s->add_option("--labels-config", o.labels_config, "Segmentation label to clinical name map");
    s->add_option("--spacing", o.spacing, "Working grid spacing in mm")->check(CLI::PositiveNumber);
    s->add_option("--min-overlap", o.min_overlap, "Minimum atlas overlap in voxels");
    s->add_option("--report", o.report, "Write skipped-study report (JSON)");
  };

  auto* describe = app.add_subcommand("describe", "Compute task descriptors per study and label");
  study_opts(describe);
  workers_opt(describe);
  describe->add_option("--out", o.out, "Descriptor JSONL");

  auto* stubs = app.add_subcommand("stubs", "Write random metadata-only descriptors");
  seed_opt(stubs);
  stubs->add_option("--studies", o.stub_studies, "Number of studies")->required();
  stubs->add_option("--labels", o.stub_labels, "Comma-separated label names");
  stubs->add_option("--out", o.out, "Descriptor JSONL");

  auto* generate = app.add_subcommand("generate", "Sample question/answer records");
  study_opts(generate);
  seed_opt(generate);
  workers_opt(generate);
  generate->add_option("--descriptors", o.descriptors, "Descriptor JSONL instead of images");
  generate->add_option("--bank", o.bank, "Template bank (default: built-in)");
  generate->add_option("--out", o.out, "Dataset JSONL");

  auto* stats = app.add_subcommand("stats", "Label frequency table of a dataset");
  stats->add_option("--in", o.in, "Dataset JSONL");
  stats->add_option("--out", o.out, "CSV (default stdout)");

  auto* split = app.add_subcommand("split", "Study-level train/val/test split");
  seed_opt(split);
  split->add_option("--in", o.in, "JSONL with study_id fields");
  split->add_option("--out", o.out, "CSV (default stdout)");

  auto* eval = app.add_subcommand("eval", "Score predictions against gold records");
  eval->add_option("--gold", o.gold, "Gold dataset JSONL");
  eval->add_option("--pred", o.pred, "Prediction JSONL");
  eval->add_option("--out", o.out, "Report JSON");
  eval->add_option("--kappa", o.kappa, "Second prediction set for Cohen's kappa");
  eval->add_option("--resamples", o.resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  seed_opt(eval);
  workers_opt(eval);

  auto* moe_check = app.add_subcommand("moe-check", "Routing invariants and gradient check");
  seed_opt(moe_check);
  moe_check->add_option("--experts", o.experts, "High-level experts")->check(CLI::PositiveNumber);
  moe_check->add_option("--granularity", o.granularity, "Comma list of modality|token per expert");

  auto* moe_demo = app.add_subcommand("moe-demo", "Train the toy multi-task problem");
  seed_opt(moe_demo);
  workers_opt(moe_demo);
  moe_demo->add_option("--steps", o.steps, "Gradient steps")->check(CLI::NonNegativeNumber);
  moe_demo->add_option("--lr", o.lr, "Learning rate");
  moe_demo->add_option("--out", o.out, "Loss curve CSV");
  moe_demo->add_option("--checkpoint", o.checkpoint, "Write trained parameters");

  auto* heatmap = app.add_subcommand("heatmap", "Correlation of high-level routing across template prompts");
  seed_opt(heatmap);
  heatmap->add_option("--checkpoint", o.checkpoint, "Parameters (default: seeded init)");
  heatmap->add_option("--labels-config", o.labels_config, "Label names");
  heatmap->add_option("--experts", o.experts, "High-level experts")->check(CLI::PositiveNumber);
  heatmap->add_option("--granularity", o.granularity, "Comma list of modality|token per expert");
  heatmap->add_option("--out", o.out, "Heatmap CSV");

  auto* fixture = app.add_subcommand("make-fixture", "Write the bundled synthetic studies and atlas");
  fixture->add_option("--out", o.out, "Output directory");

  auto* dump = app.add_subcommand("dump-bank", "Print the built-in template bank");
  dump->add_option("--out", o.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::vector<std::pair<CLI::App*, int (*)(const Options&)>> commands = {
      {describe, cmd_describe},   {stubs, cmd_stubs},         {generate, cmd_generate},
      {stats, cmd_stats},         {split, cmd_split},         {eval, cmd_eval},
      {moe_check, cmd_moe_check}, {moe_demo, cmd_moe_demo},   {heatmap, cmd_heatmap},
      {fixture, cmd_make_fixture}, {dump, cmd_dump_bank}};
  try {
    for (const auto& [sub, fn] : commands) {
      if (!sub->parsed()) continue;
      stanza(*sub, o);
      return fn(o);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.error_class());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ErrorClass::config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

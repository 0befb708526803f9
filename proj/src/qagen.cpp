// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/qagen.hpp"

#include "mpvqa/conform.hpp"
#include "mpvqa/error.hpp"
#include "mpvqa/nifti.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace mpvqa {

namespace fs = std::filesystem;

TaskDescriptors absent_descriptor(std::string study_id, std::string label_name) {
  TaskDescriptors d;
  d.study_id = std::move(study_id);
  d.label_name = std::move(label_name);
  return d;
}

ojson descriptor_to_json(const TaskDescriptors& d) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["study_id"] = d.study_id;
  j["label"] = d.label_name;
  j["volume"] = std::string(to_string(d.volume.category));
  if (d.regions.not_applicable) {
    j["regions"] = ojson::array({std::string(kNotApplicable)});
  } else {
    j["regions"] = d.regions.regions;
  }
  j["shape"] = std::string(to_string(d.shape));
  j["spread"] = std::string(to_string(d.spread.category));
  if (d.present()) {
    ojson diag;
    diag["voxels"] = d.voxels;
    diag["volume_fraction"] = d.volume.raw_fraction;
    diag["region_overlap_voxels"] = d.regions.overlap_counts;
    diag["n_components"] = d.spread.n_components;
    diag["core_fraction"] = d.spread.core_fraction;
    if (d.metrics) {
      const ShapeMetrics& m = *d.metrics;
      diag["shape"] = {{"volume_mm3", m.volume},      {"area_mm2", m.area},
                       {"sphericity", m.sphericity},  {"compactness", m.compactness},
                       {"elongation", m.elongation},  {"flatness", m.flatness},
                       {"solidity", m.solidity}};
    }
    j["diagnostics"] = diag;
  }
  j["warnings"] = d.warnings;
  return j;
}

TaskDescriptors descriptor_from_json(const ojson& j) {
  try {
    TaskDescriptors d;
    d.study_id = j.at("study_id").get<std::string>();
    d.label_name = j.at("label").get<std::string>();
    d.volume.category = parse_volume_bin(j.at("volume").get<std::string>());
    auto regions = j.at("regions").get<std::vector<std::string>>();
    if (regions_not_applicable(regions)) {
      d.regions.not_applicable = true;
    } else {
      d.regions.not_applicable = false;
      for (const auto& r : regions) {
        if (region_index(r) < 0) throw ConfigError("unknown region '" + r + "'");
      }
      d.regions.regions = regions;
    }
    d.shape = parse_shape(j.at("shape").get<std::string>());
    d.spread.category = parse_spread(j.at("spread").get<std::string>());
    if (j.contains("diagnostics")) {
      const auto& diag = j["diagnostics"];
      d.voxels = diag.value("voxels", std::size_t{0});
      d.volume.raw_fraction = diag.value("volume_fraction", 0.0);
      d.regions.overlap_counts =
          diag.value("region_overlap_voxels", std::vector<std::size_t>{});
      d.spread.n_components = diag.value("n_components", std::size_t{0});
      d.spread.core_fraction = diag.value("core_fraction", 0.0);
    }
    if (j.contains("warnings")) d.warnings = j["warnings"].get<std::vector<std::string>>();
    const bool na_volume = !d.present();
    const bool na_all = na_volume && d.regions.not_applicable &&
                        d.shape == ShapeCategory::not_applicable &&
                        d.spread.category == SpreadCategory::not_applicable;
    const bool na_any = na_volume || d.regions.not_applicable ||
                        d.shape == ShapeCategory::not_applicable ||
                        d.spread.category == SpreadCategory::not_applicable;
    if (na_any && !na_all) {
      throw ConfigError("descriptor " + d.study_id + "/" + d.label_name +
                        ": N/A must apply to all four fields or none");
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed descriptor: ") + e.what());
  }
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::optional<fs::path> find_one(const fs::path& dir, std::initializer_list<std::string_view> stems) {
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  for (std::string_view stem : stems) {
    for (const auto& p : entries) {
      const std::string name = p.filename().string();
      for (std::string_view ext : {".nii", ".nii.gz"}) {
        if (ends_with(name, std::string(stem) + std::string(ext))) return p;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

StudyInput load_study(const fs::path& dir, const Spacing& spacing) {
  if (!fs::is_directory(dir)) throw ConfigError("study directory not found: " + dir.string());
  auto seg_path = find_one(dir, {"seg"});
  auto t1_path = find_one(dir, {"t1n", "t1"});
  if (!seg_path) throw FormatError("no *seg.nii[.gz] in " + dir.string());
  if (!t1_path) throw FormatError("no *t1n.nii[.gz] or *t1.nii[.gz] in " + dir.string());
  StudyInput s;
  s.study_id = dir.filename().string();
  if (s.study_id.empty()) s.study_id = dir.parent_path().filename().string();
  s.segmentation = LabelMask(conform_to_ras(read_nifti(*seg_path), spacing, Interpolation::nearest));
  s.brain = conform_to_ras(read_nifti(*t1_path), spacing, Interpolation::nearest);
  if (!s.segmentation.volume().same_grid(s.brain)) {
    throw GeometryError(s.study_id + ": segmentation and T1 grids differ after conforming");
  }
  return s;
}

std::vector<TaskDescriptors> compute_descriptors(const StudyInput& study, const Atlas& atlas,
                                                 const DescriptorConfig& config) {
  std::vector<TaskDescriptors> out;
  for (const auto& [value, name] : config.labels) {
    if (!study.segmentation.label_set().count(value)) {
      out.push_back(absent_descriptor(study.study_id, name));
      continue;
    }
    const Volume3D mask = study.segmentation.binary(value);
    TaskDescriptors d;
    d.study_id = study.study_id;
    d.label_name = name;
    d.voxels = mask.count_nonzero();
    d.volume = volume_bin(relative_volume(mask, study.brain));
    if (d.volume.clamped) d.warnings.emplace_back("volume_fraction_above_75pct");
    d.regions = region_overlap(mask, atlas, config.min_overlap_voxels);
    if (d.regions.regions.empty()) d.warnings.emplace_back("no_region_above_overlap_floor");
    const ComponentLabeling labeling = connected_components(mask);
    d.spread = spread_classify(labeling);
    std::vector<ShapeMetrics> per;
    per.reserve(labeling.n_components());
    for (std::size_t c = 0; c < labeling.n_components(); ++c) per.push_back(shape_metrics(labeling, c));
    const ShapeMetrics agg = aggregate_metrics(per, labeling.core_fraction());
    d.shape = shape_classify(agg, labeling.total_volume());
    d.metrics = agg;
    out.push_back(std::move(d));
  }
  return out;
}

std::string join_regions(const std::vector<std::string>& regions) {
  std::string out;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (i > 0) out += (i + 1 == regions.size()) ? " and " : ", ";
    out += regions[i];
  }
  return out;
}

namespace {

std::string region_text(const TaskDescriptors& d) {
  if (d.regions.not_applicable || d.regions.regions.empty()) return std::string(kNotApplicable);
  return join_regions(d.regions.regions);
}

std::string fill(std::string_view text, const TaskDescriptors& d, const std::string& template_id) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      out += text[i++];
      continue;
    }
    const std::size_t close = text.find('}', i);
    if (close == std::string_view::npos) throw TemplateError(template_id + ": unterminated '{'");
    const std::string_view name = text.substr(i + 1, close - i - 1);
    if (name == "label") out += d.label_name;
    else if (name == "volume") out += to_string(d.volume.category);
    else if (name == "regions") out += region_text(d);
    else if (name == "shape") out += to_string(d.shape);
    else if (name == "spread") out += to_string(d.spread.category);
    else throw TemplateError(template_id + ": cannot fill {" + std::string(name) + "}");
    i = close + 1;
  }
  return out;
}

}  // namespace

QAPair render(const Template& t, const TaskDescriptors& desc) {
  return {fill(t.question, desc, t.id), fill(t.answer, desc, t.id)};
}

std::string_view to_string(OosKind kind) {
  switch (kind) {
    case OosKind::none: return "none";
    case OosKind::partial: return "partial";
    case OosKind::full: return "full";
  }
  return "none";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

bool regions_unspecified(const std::vector<std::string>& regions) {
  return regions.size() == 1 && regions[0] == kUnspecified;
}

bool regions_not_applicable(const std::vector<std::string>& regions) {
  return regions.size() == 1 && regions[0] == kNotApplicable;
}

ojson record_to_json(const DatasetRecord& r) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = r.id;
  j["study_id"] = r.study_id;
  j["label"] = r.label_name;
  j["template_id"] = r.template_id;
  j["kind"] = std::string(to_string(r.kind));
  j["question"] = r.question;
  j["answer"] = r.answer;
  ojson tasks = ojson::array();
  for (Task t : kAllTasks) {
    if (has_task(r.task_set, t)) tasks.push_back(std::string(to_string(t)));
  }
  j["task_set"] = tasks;
  j["gold"] = {{"volume", r.gold.volume},
               {"region", r.gold.regions},
               {"shape", r.gold.shape},
               {"spread", r.gold.spread},
               {"out_of_scope", r.gold.out_of_scope}};
  j["oos_kind"] = std::string(to_string(r.oos_kind));
  j["split"] = std::string(to_string(r.split));
  j["warnings"] = r.warnings;
  return j;
}

DatasetRecord record_from_json(const ojson& j) {
  try {
    DatasetRecord r;
    r.id = j.at("id").get<std::string>();
    r.study_id = j.at("study_id").get<std::string>();
    r.label_name = j.at("label").get<std::string>();
    r.template_id = j.value("template_id", std::string{});
    r.kind = parse_template_kind(j.value("kind", std::string("multitask")));
    r.question = j.value("question", std::string{});
    r.answer = j.value("answer", std::string{});
    r.task_set = 0;
    for (const auto& t : j.value("task_set", std::vector<std::string>{})) {
      r.task_set |= parse_task_set(t);
    }
    const auto& g = j.at("gold");
    r.gold.volume = g.at("volume").get<std::string>();
    r.gold.regions = g.at("region").get<std::vector<std::string>>();
    r.gold.shape = g.at("shape").get<std::string>();
    r.gold.spread = g.at("spread").get<std::string>();
    r.gold.out_of_scope = g.at("out_of_scope").get<bool>();
    const std::string oos = j.value("oos_kind", std::string("none"));
    r.oos_kind = oos == "partial" ? OosKind::partial : oos == "full" ? OosKind::full : OosKind::none;
    r.split = parse_split(j.value("split", std::string("train")));
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed record: ") + e.what());
  }
}

std::array<std::size_t, 4> choose_multitask(const TemplateBank& bank, CounterRng& rng) {
  const auto& pool = bank.of_kind(TemplateKind::multitask);
  const auto& all = bank.templates();
  if (pool.size() < 4) throw BankCapacityError("need at least 4 multitask templates");

  std::vector<std::size_t> candidates = pool;
  std::vector<std::size_t> picks;
  for (int k = 0; k < 4; ++k) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(candidates.size()));
    picks.push_back(candidates[j]);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(j));
  }
  auto union_of = [&](const std::vector<std::size_t>& v) {
    TaskSet u = 0;
    for (std::size_t i : v) u |= all[i].tasks;
    return u;
  };
  // Each iteration strictly grows the union, so at most four repairs happen.
  while (union_of(picks) != kAllTaskBits) {
    std::size_t victim = 0;
    int fewest = 5;
    for (std::size_t p = 0; p < picks.size(); ++p) {
      TaskSet others = 0;
      for (std::size_t q = 0; q < picks.size(); ++q) {
        if (q != p) others |= all[picks[q]].tasks;
      }
      const int unique = task_count(static_cast<TaskSet>(all[picks[p]].tasks & ~others));
      if (unique <= fewest) {
        fewest = unique;
        victim = p;
      }
    }
    std::vector<std::size_t> rest = picks;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(victim));
    const TaskSet before = union_of(picks);
    const TaskSet base = union_of(rest);
    std::vector<std::size_t> growing;
    for (std::size_t i : candidates) {
      if (task_count(static_cast<TaskSet>(base | all[i].tasks)) > task_count(before)) growing.push_back(i);
    }
    if (growing.empty()) throw BankCapacityError("multitask templates cannot cover all four tasks");
    const std::size_t chosen = growing[static_cast<std::size_t>(rng.uniform_int(growing.size()))];
    candidates.erase(std::find(candidates.begin(), candidates.end(), chosen));
    candidates.push_back(picks[victim]);
    std::sort(candidates.begin(), candidates.end());
    picks.erase(picks.begin() + static_cast<std::ptrdiff_t>(victim));
    picks.push_back(chosen);
  }
  return {picks[0], picks[1], picks[2], picks[3]};
}

namespace {

GoldValues gold_for(const TaskDescriptors& d, TaskSet asked, bool out_of_scope) {
  GoldValues g;
  g.out_of_scope = out_of_scope;
  if (has_task(asked, Task::volume)) g.volume = std::string(to_string(d.volume.category));
  if (has_task(asked, Task::region)) {
    if (d.regions.not_applicable) g.regions = {std::string(kNotApplicable)};
    else g.regions = d.regions.regions;
  }
  if (has_task(asked, Task::shape)) g.shape = std::string(to_string(d.shape));
  if (has_task(asked, Task::spread)) g.spread = std::string(to_string(d.spread.category));
  return g;
}

DatasetRecord make_record(const TaskDescriptors& d, const Template& t, int k) {
  DatasetRecord r;
  r.id = d.study_id + "/" + d.label_name + "/" + std::to_string(k);
  r.study_id = d.study_id;
  r.label_name = d.label_name;
  r.template_id = t.id;
  r.kind = t.kind;
  const QAPair qa = render(t, d);
  r.question = qa.question;
  r.answer = qa.answer;
  r.task_set = t.tasks;
  r.oos_kind = t.kind == TemplateKind::multitask ? OosKind::none
               : t.kind == TemplateKind::partial_oos ? OosKind::partial
                                                     : OosKind::full;
  r.gold = gold_for(d, t.tasks, r.oos_kind != OosKind::none);
  r.warnings = d.warnings;
  return r;
}

}  // namespace

std::vector<DatasetRecord> sample_questions(const TaskDescriptors& desc, const TemplateBank& bank,
                                            std::uint64_t seed) {
  CounterRng rng(seed, {"qa", desc.study_id, desc.label_name});
  const auto multi = choose_multitask(bank, rng);
  const auto& partial = bank.of_kind(TemplateKind::partial_oos);
  const auto& full = bank.of_kind(TemplateKind::full_oos);
  if (partial.empty() || full.empty()) throw BankCapacityError("bank lacks out-of-scope templates");
  const std::size_t p = partial[static_cast<std::size_t>(rng.uniform_int(partial.size()))];
  const std::size_t f = full[static_cast<std::size_t>(rng.uniform_int(full.size()))];

  std::vector<DatasetRecord> out;
  int k = 0;
  for (std::size_t i : multi) out.push_back(make_record(desc, bank.templates()[i], k++));
  out.push_back(make_record(desc, bank.templates()[p], k++));
  out.push_back(make_record(desc, bank.templates()[f], k++));
  return out;
}

std::map<std::string, Split> split_dataset(const std::vector<std::string>& study_ids,
                                           std::uint64_t seed) {
  std::vector<std::string> ids(study_ids.begin(), study_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  CounterRng rng(seed, {"split"});
  shuffle(ids, rng);
  const std::size_t n = ids.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  std::map<std::string, Split> out;
  for (std::size_t i = 0; i < n; ++i) {
    out[ids[i]] = i < n_train ? Split::train : i < n_train + n_val ? Split::val : Split::test;
  }
  return out;
}

std::vector<DatasetRecord> generate_records(const std::vector<TaskDescriptors>& descriptors,
                                            const TemplateBank& bank, std::uint64_t seed,
                                            unsigned workers) {
  std::vector<std::vector<DatasetRecord>> per(descriptors.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < descriptors.size(); i = next++) {
      per[i] = sample_questions(descriptors[i], bank, seed);
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<std::string> ids;
  ids.reserve(descriptors.size());
  for (const auto& d : descriptors) ids.push_back(d.study_id);
  const auto splits = split_dataset(ids, seed);

  std::vector<DatasetRecord> out;
  out.reserve(descriptors.size() * 6);
  for (auto& group : per) {
    for (auto& r : group) {
      r.split = splits.at(r.study_id);
      out.push_back(std::move(r));
    }
  }
  return out;
}

double DatasetStats::percent(std::string_view task, std::string_view label) const {
  for (const auto& r : rows) {
    if (r.task == task && r.label == label) return r.percent;
  }
  throw ConfigError("no stats row " + std::string(task) + "/" + std::string(label));
}

DatasetStats compute_stats(const std::vector<DatasetRecord>& records) {
  DatasetStats s;
  s.n_questions = records.size();
  std::set<std::string> studies, questions, answers;
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& r : records) {
    studies.insert(r.study_id);
    questions.insert(r.question);
    answers.insert(r.answer);
    ++counts[{"Volume", r.gold.volume}];
    ++counts[{"Shape", r.gold.shape}];
    ++counts[{"Spread", r.gold.spread}];
    for (const auto& region : r.gold.regions) ++counts[{"Region", region}];
    ++counts[{"Out-of-scope", r.gold.out_of_scope ? "Out-of-scope" : "Not out-of-scope"}];
  }
  s.n_studies = studies.size();
  s.n_unique_questions = questions.size();
  s.n_unique_answers = answers.size();

  const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
  auto add = [&](const std::string& task, std::string_view label) {
    auto it = counts.find({task, std::string(label)});
    const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    s.rows.push_back({task, std::string(label), 100.0 * c / n});
  };
  const std::string un(kUnspecified), na(kNotApplicable);
  add("Volume", un);
  add("Volume", na);
  for (std::size_t b = 0; b + 1 < kVolumeBinNames.size(); ++b) add("Volume", kVolumeBinNames[b]);
  add("Region", un);
  add("Region", na);
  for (auto name : kRegionNames) add("Region", name);
  add("Shape", un);
  add("Shape", na);
  for (auto c : {ShapeCategory::focus, ShapeCategory::round, ShapeCategory::oval,
                 ShapeCategory::elongated, ShapeCategory::irregular}) {
    add("Shape", to_string(c));
  }
  add("Spread", un);
  add("Spread", na);
  for (auto c : {SpreadCategory::single_lesion, SpreadCategory::core_with_satellites,
                 SpreadCategory::scattered}) {
    add("Spread", to_string(c));
  }
  add("Out-of-scope", "Not out-of-scope");
  add("Out-of-scope", "Out-of-scope");
  return s;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string stats_csv(const DatasetStats& stats) {
  std::ostringstream out;
  out << "Task,Label name,Label frequency\n";
  out << std::fixed << std::setprecision(1);
  for (const auto& r : stats.rows) {
    out << csv_field(r.task) << ',' << csv_field(r.label) << ',' << r.percent << '\n';
  }
  out << "Summary,#questions," << stats.n_questions << '\n';
  out << "Summary,#mpMRI," << stats.n_studies << '\n';
  out << "Summary,#unique questions," << stats.n_unique_questions << '\n';
  out << "Summary,#unique answers," << stats.n_unique_answers << '\n';
  return out.str();
}

std::string to_jsonl(const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<ojson> parse_jsonl(std::string_view text) {
  std::vector<ojson> out;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(ojson::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("JSONL line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<DatasetRecord> records_from_jsonl(std::string_view text) {
  std::vector<DatasetRecord> out;
  for (const auto& j : parse_jsonl(text)) out.push_back(record_from_json(j));
  return out;
}

}  // namespace mpvqa

// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/eval.hpp"

#include "mpvqa/error.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace mpvqa {

std::string_view to_string(EvalTask task) {
  switch (task) {
    case EvalTask::volume: return "volume";
    case EvalTask::region: return "region";
    case EvalTask::shape: return "shape";
    case EvalTask::spread: return "spread";
    case EvalTask::out_of_scope: return "out_of_scope";
  }
  return "volume";
}

namespace {

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw ConfigError("predictions and gold records are not aligned");
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::optional<double> record_score(const GoldValues& pred, const GoldValues& gold, EvalTask task) {
  auto exact = [](const std::string& p, const std::string& g) -> std::optional<double> {
    if (g == kUnspecified) return std::nullopt;
    return p == g ? 1.0 : 0.0;
  };
  switch (task) {
    case EvalTask::volume: return exact(pred.volume, gold.volume);
    case EvalTask::shape: return exact(pred.shape, gold.shape);
    case EvalTask::spread: return exact(pred.spread, gold.spread);
    case EvalTask::region:
      if (regions_unspecified(gold.regions)) return std::nullopt;
      return as_set(pred.regions) == as_set(gold.regions) ? 1.0 : 0.0;
    case EvalTask::out_of_scope: return pred.out_of_scope == gold.out_of_scope ? 1.0 : 0.0;
  }
  return std::nullopt;
}

std::optional<double> region_label_score(const GoldValues& pred, const GoldValues& gold) {
  if (regions_unspecified(gold.regions)) return std::nullopt;
  const bool gold_na = regions_not_applicable(gold.regions);
  const bool pred_na = regions_not_applicable(pred.regions);
  if (gold_na || pred_na) return gold_na == pred_na ? 1.0 : 0.0;
  const auto g = as_set(gold.regions);
  const auto p = as_set(pred.regions);
  int agree = 0;
  for (auto name : kRegionNames) {
    const std::string n(name);
    if (g.count(n) == p.count(n)) ++agree;
  }
  return agree / static_cast<double>(kRegionNames.size());
}

std::vector<double> task_scores(const std::vector<GoldValues>& preds,
                                const std::vector<GoldValues>& golds, EvalTask task) {
  check_aligned(preds.size(), golds.size());
  std::vector<double> out;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (auto s = record_score(preds[i], golds[i], task)) out.push_back(*s);
  }
  return out;
}

std::vector<double> region_label_scores(const std::vector<GoldValues>& preds,
                                        const std::vector<GoldValues>& golds) {
  check_aligned(preds.size(), golds.size());
  std::vector<double> out;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (auto s = region_label_score(preds[i], golds[i])) out.push_back(*s);
  }
  return out;
}

std::optional<double> task_accuracy(const std::vector<GoldValues>& preds,
                                    const std::vector<GoldValues>& golds, EvalTask task) {
  const auto s = task_scores(preds, golds, task);
  if (s.empty()) return std::nullopt;
  return 100.0 * mean(s);
}

std::optional<double> region_accuracy(const std::vector<GoldValues>& preds,
                                      const std::vector<GoldValues>& golds) {
  const auto s = region_label_scores(preds, golds);
  if (s.empty()) return std::nullopt;
  return 100.0 * mean(s);
}

double bootstrap_std(const std::vector<double>& scores, int resamples, std::uint64_t seed,
                     unsigned workers) {
  if (scores.empty() || resamples < 1) return 0.0;
  const std::size_t n = scores.size();
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int b = next++; b < resamples; b = next++) {
      CounterRng rng(seed, {"bootstrap", std::to_string(b)});
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += scores[static_cast<std::size_t>(rng.uniform_int(n))];
      stats[static_cast<std::size_t>(b)] = 100.0 * s / static_cast<double>(n);
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  const double m = mean(stats);
  double var = 0;
  for (double x : stats) var += (x - m) * (x - m);
  return std::sqrt(var / static_cast<double>(stats.size()));
}

KappaResult cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ConfigError("cohen_kappa: annotations must be nonempty and of equal length");
  }
  const double n = static_cast<double>(a.size());
  std::map<std::string, double> ca, cb;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    if (a[i] == b[i]) agree += 1;
  }
  const double po = agree / n;
  double pe = 0;
  for (const auto& [label, count] : ca) {
    auto it = cb.find(label);
    if (it != cb.end()) pe += (count / n) * (it->second / n);
  }
  KappaResult r;
  if (pe >= 1.0) {
    r.degenerate = true;
    r.kappa = 1.0;
  } else {
    r.kappa = (po - pe) / (1.0 - pe);
  }
  r.kappa_x100 = 100.0 * r.kappa;
  return r;
}

std::optional<double> pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0) throw ConfigError("pearson: vectors differ in length");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = (da * da).sum(), sbb = (db * db).sum();
  // Relative threshold so vectors that are constant up to rounding count as flat.
  const double scale_a = std::max(1.0, a.squaredNorm()), scale_b = std::max(1.0, b.squaredNorm());
  if (saa <= 1e-24 * scale_a || sbb <= 1e-24 * scale_b) return std::nullopt;
  const double r = (da * db).sum() / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

Heatmap routing_heatmap(const std::vector<Eigen::VectorXd>& pi_high) {
  const std::size_t k = pi_high.size();
  if (k < 2) throw ConfigError("routing_heatmap: need at least two vectors");
  for (const auto& v : pi_high) {
    if (v.size() != pi_high[0].size()) throw ConfigError("routing_heatmap: vectors differ in length");
  }
  Heatmap h;
  h.correlation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  h.zero_variance.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) h.zero_variance[i] = !pearson(pi_high[i], pi_high[i]).has_value();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double r = pearson(pi_high[i], pi_high[j]).value_or(0.0);
      h.correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
      h.correlation(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
    }
  }
  return h;
}

std::string heatmap_csv(const Heatmap& heatmap, const std::vector<std::string>& labels) {
  const auto k = static_cast<std::size_t>(heatmap.correlation.rows());
  if (labels.size() != k) throw ConfigError("heatmap_csv: label count differs from matrix size");
  auto field = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  };
  std::ostringstream out;
  out << "prompt";
  for (const auto& l : labels) out << ',' << field(l);
  out << '\n' << std::setprecision(10);
  for (std::size_t i = 0; i < k; ++i) {
    out << field(labels[i]);
    for (std::size_t j = 0; j < k; ++j) {
      out << ',' << heatmap.correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    out << '\n';
  }
  return out.str();
}

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    // En and em dashes become '-' so "1–5%" matches "1-5%".
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xe2 &&
        static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(s[i + 2]) == 0x93 || static_cast<unsigned char>(s[i + 2]) == 0x94)) {
      out += '-';
      i += 2;
      continue;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
  }
  return out;
}

bool word_at(const std::string& text, std::size_t pos, std::size_t len) {
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  if (pos > 0 && is_word(text[pos - 1])) return false;
  if (pos + len < text.size() && is_word(text[pos + len])) return false;
  return true;
}

std::size_t find_word(const std::string& text, std::string_view word) {
  for (std::size_t pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos + 1)) {
    if (word_at(text, pos, word.size())) return pos;
  }
  return std::string::npos;
}

}  // namespace

GoldValues normalize_answer(std::string_view answer) {
  const std::string t = lower_ascii(answer);
  GoldValues v;
  std::size_t best = std::string::npos;
  for (std::size_t b = 0; b + 1 < kVolumeBinNames.size(); ++b) {
    const std::size_t pos = t.find(kVolumeBinNames[b]);
    // "<1%" must not be read inside "1-5%" and vice versa.
    if (pos != std::string::npos && (pos == 0 || !std::isdigit(static_cast<unsigned char>(t[pos - 1])))) {
      if (pos < best) {
        best = pos;
        v.volume = std::string(kVolumeBinNames[b]);
      }
    }
  }
  best = std::string::npos;
  for (auto c : {ShapeCategory::focus, ShapeCategory::round, ShapeCategory::oval,
                 ShapeCategory::elongated, ShapeCategory::irregular}) {
    const std::size_t pos = find_word(t, to_string(c));
    if (pos < best) {
      best = pos;
      v.shape = std::string(to_string(c));
    }
  }
  best = std::string::npos;
  for (auto c : {SpreadCategory::single_lesion, SpreadCategory::core_with_satellites,
                 SpreadCategory::scattered}) {
    const std::size_t pos = find_word(t, to_string(c));
    if (pos < best) {
      best = pos;
      v.spread = std::string(to_string(c));
    }
  }
  std::vector<std::pair<std::size_t, std::string>> found;
  for (auto name : kRegionNames) {
    const std::size_t pos = find_word(t, name);
    if (pos != std::string::npos) found.emplace_back(pos, std::string(name));
  }
  std::sort(found.begin(), found.end());
  if (!found.empty()) {
    v.regions.clear();
    for (auto& [pos, name] : found) v.regions.push_back(name);
  }
  // An absent label renders every asked field as "N/A"; fields the answer
  // does not mention are never scored, so filling all of them is harmless.
  if (find_word(t, "n/a") != std::string::npos) {
    if (v.volume == kUnspecified) v.volume = kNotApplicable;
    if (v.shape == kUnspecified) v.shape = kNotApplicable;
    if (v.spread == kUnspecified) v.spread = kNotApplicable;
    if (regions_unspecified(v.regions)) v.regions = {std::string(kNotApplicable)};
  }
  static constexpr std::string_view kDecline[] = {
      "cannot", "can't", "unable to", "outside my", "beyond my", "beyond what i", "not available to me",
      "do not have access", "no access", "not something i can", "outside what i", "i have no"};
  for (auto phrase : kDecline) {
    if (t.find(phrase) != std::string::npos) v.out_of_scope = true;
  }
  return v;
}

MetricsReport evaluate(const std::vector<GoldValues>& preds, const std::vector<GoldValues>& golds,
                       int resamples, std::uint64_t seed, unsigned workers) {
  MetricsReport r;
  r.n_records = golds.size();
  r.resamples = resamples;
  r.seed = seed;
  auto fill = [&](TaskMetric& m, const std::vector<double>& scores, std::string_view name) {
    m.n = scores.size();
    if (scores.empty()) return;
    m.accuracy = 100.0 * mean(scores);
    CounterRng key(seed, {"eval", name});
    m.std = bootstrap_std(scores, resamples, key.next_u64(), workers);
  };
  fill(r.volume, task_scores(preds, golds, EvalTask::volume), "volume");
  fill(r.region, region_label_scores(preds, golds), "region");
  fill(r.shape, task_scores(preds, golds, EvalTask::shape), "shape");
  fill(r.spread, task_scores(preds, golds, EvalTask::spread), "spread");
  fill(r.out_of_scope, task_scores(preds, golds, EvalTask::out_of_scope), "out_of_scope");
  double sum = 0;
  int count = 0;
  for (const TaskMetric* m : {&r.volume, &r.region, &r.shape, &r.spread}) {
    if (m->accuracy) {
      sum += *m->accuracy;
      ++count;
    }
  }
  if (count > 0) r.mean = sum / count;
  return r;
}

ojson report_to_json(const MetricsReport& r) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["n_records"] = r.n_records;
  j["bootstrap"] = {{"resamples", r.resamples}, {"seed", r.seed}};
  j["region_metric"] = "per-label";
  ojson tasks;
  auto put = [&](const char* name, const TaskMetric& m) {
    ojson t;
    t["accuracy"] = m.accuracy ? ojson(*m.accuracy) : ojson(nullptr);
    t["std"] = m.std;
    t["n"] = m.n;
    tasks[name] = t;
  };
  put("volume", r.volume);
  put("region", r.region);
  put("shape", r.shape);
  put("spread", r.spread);
  put("out_of_scope", r.out_of_scope);
  j["tasks"] = tasks;
  j["mean"] = r.mean ? ojson(*r.mean) : ojson(nullptr);
  return j;
}

std::vector<PredictionRecord> predictions_from_jsonl(std::string_view text) {
  std::vector<PredictionRecord> out;
  for (const auto& j : parse_jsonl(text)) {
    try {
      PredictionRecord p;
      p.id = j.at("id").get<std::string>();
      if (j.contains("answer") && !j.contains("volume") && !j.contains("region") &&
          !j.contains("shape") && !j.contains("spread")) {
        p.values = normalize_answer(j["answer"].get<std::string>());
      } else {
        p.values.volume = j.value("volume", std::string(kUnspecified));
        if (j.contains("region")) p.values.regions = j["region"].get<std::vector<std::string>>();
        p.values.shape = j.value("shape", std::string(kUnspecified));
        p.values.spread = j.value("spread", std::string(kUnspecified));
        p.values.out_of_scope = j.value("out_of_scope", false);
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed prediction: ") + e.what());
    }
  }
  return out;
}

std::vector<GoldValues> align_predictions(const std::vector<DatasetRecord>& gold,
                                          const std::vector<PredictionRecord>& preds) {
  std::map<std::string, const GoldValues*> by_id;
  for (const auto& p : preds) by_id[p.id] = &p.values;
  std::vector<GoldValues> out;
  out.reserve(gold.size());
  for (const auto& g : gold) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw ConfigError("no prediction for record " + g.id);
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace mpvqa

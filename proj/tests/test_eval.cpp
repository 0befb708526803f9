// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/error.hpp"
#include "mpvqa/eval.hpp"
#include "mpvqa/fixture.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace mpvqa;
using Catch::Approx;

namespace {

GoldValues vol(std::string v) {
  GoldValues g;
  g.volume = std::move(v);
  return g;
}

GoldValues reg(std::vector<std::string> r) {
  GoldValues g;
  g.regions = std::move(r);
  return g;
}

}  // namespace

TEST_CASE("exact-match accuracy") {
  const std::vector<GoldValues> gold{vol("<1%"), vol("1-5%"), vol("N/A"), vol("5-10%")};
  CHECK(task_accuracy(gold, gold, EvalTask::volume) == 100.0);
  const std::vector<GoldValues> half{vol("<1%"), vol("5-10%"), vol("N/A"), vol("1-5%")};
  CHECK(task_accuracy(half, gold, EvalTask::volume) == 50.0);
  const std::vector<GoldValues> na(3, vol("N/A"));
  CHECK(task_accuracy(na, na, EvalTask::volume) == 100.0);
  // Unspecified gold is not scored.
  const std::vector<GoldValues> none(2, vol("Unspecified"));
  CHECK_FALSE(task_accuracy(none, none, EvalTask::volume).has_value());
  CHECK_THROWS_AS(task_accuracy(half, na, EvalTask::volume), ConfigError);
}

TEST_CASE("per-label region accuracy") {
  const std::vector<GoldValues> g{reg({"frontal"})};
  CHECK(region_accuracy(g, g) == 100.0);
  CHECK(region_accuracy({reg({"frontal", "parietal"})}, g) == Approx(800.0 / 9.0));
  CHECK(region_accuracy({reg({"frontal"})}, {reg({"N/A"})}) == 0.0);
  CHECK(region_accuracy({reg({"N/A"})}, {reg({"N/A"})}) == 100.0);
  CHECK(record_score(reg({"parietal", "frontal"}), reg({"frontal", "parietal"}), EvalTask::region) == 1.0);
  CHECK(record_score(reg({"frontal"}), reg({"frontal", "parietal"}), EvalTask::region) == 0.0);
}

TEST_CASE("out-of-scope is scored on every record") {
  GoldValues a, b;
  b.out_of_scope = true;
  CHECK(task_accuracy({a, a}, {a, b}, EvalTask::out_of_scope) == 50.0);
}

TEST_CASE("bootstrap") {
  CHECK(bootstrap_std(std::vector<double>(50, 1.0), 200, 3) == 0.0);
  CHECK(bootstrap_std({}, 200, 3) == 0.0);
  // Two records, one correct: resampled accuracy is 0, 50 or 100 with
  // probabilities 1/4, 1/2, 1/4, so the std is sqrt(1250).
  const double s = bootstrap_std({1.0, 0.0}, 20000, 11);
  CHECK(std::abs(s / std::sqrt(1250.0) - 1.0) < 0.02);
  const std::vector<double> scores{1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1};
  CHECK(bootstrap_std(scores, 500, 4, 1) == bootstrap_std(scores, 500, 4, 1));
  CHECK(bootstrap_std(scores, 500, 4, 1) == bootstrap_std(scores, 500, 4, 3));
  CHECK(bootstrap_std(scores, 500, 4) != bootstrap_std(scores, 500, 5));
}

TEST_CASE("cohen kappa") {
  const std::vector<std::string> a{"A", "A", "B", "B"};
  CHECK(cohen_kappa(a, a).kappa == 1.0);
  CHECK(cohen_kappa(a, {"B", "B", "A", "A"}).kappa == -1.0);
  CHECK(cohen_kappa(a, {"A", "B", "A", "B"}).kappa == 0.0);
  CHECK(cohen_kappa(a, {"A", "B", "A", "B"}).kappa_x100 == 0.0);
  const KappaResult d = cohen_kappa({"A", "A"}, {"A", "A"});
  CHECK(d.degenerate);
  CHECK(d.kappa == 1.0);
  CHECK_THROWS_AS(cohen_kappa({"A"}, {}), ConfigError);
}

TEST_CASE("pearson correlation and the routing heatmap") {
  Eigen::VectorXd v(3), w(3), flat(3);
  v << 1, 2, 4;
  w = -v.array() + 7.0;
  flat << 0.2, 0.2, 0.2;
  CHECK(*pearson(v, v) == Approx(1.0));
  CHECK(*pearson(v, w) == Approx(-1.0));
  CHECK_FALSE(pearson(v, flat).has_value());

  const Heatmap h = routing_heatmap({v, w, flat});
  CHECK(h.correlation(0, 1) == Approx(-1.0));
  CHECK(h.correlation(2, 2) == 1.0);
  CHECK(h.correlation(0, 2) == 0.0);
  CHECK(h.zero_variance == std::vector<bool>{false, false, true});
  const std::string csv = heatmap_csv(h, {"a", "b,c", "d"});
  CHECK(csv.rfind("prompt,a,\"b,c\",d\n", 0) == 0);
  CHECK_THROWS_AS(routing_heatmap({v}), ConfigError);
}

TEST_CASE("free-text normalization") {
  GoldValues g = normalize_answer("The overall volume of ET is 1–5%, and it is located in Frontal and insula.");
  CHECK(g.volume == "1-5%");
  CHECK(g.regions == std::vector<std::string>{"frontal", "insula"});
  CHECK(g.shape == "Unspecified");
  CHECK_FALSE(g.out_of_scope);
  g = normalize_answer("Its shape is oval. I cannot infer histology.");
  CHECK(g.shape == "oval");
  CHECK(g.out_of_scope);
  g = normalize_answer("The volume is <1%.");
  CHECK(g.volume == "<1%");
  g = normalize_answer("The spread of RC is N/A.");
  CHECK(g.spread == "N/A");
}

TEST_CASE("property: generated answers normalize back to their gold") {
  const auto recs = generate_records(synthetic_descriptors(150, {"Enhancing Tissue", "Resection Cavity"}, 8),
                                     canonical_bank(), 3);
  std::vector<GoldValues> preds, golds;
  for (const auto& r : recs) {
    preds.push_back(normalize_answer(r.answer));
    golds.push_back(r.gold);
  }
  for (auto t : {EvalTask::volume, EvalTask::shape, EvalTask::spread, EvalTask::out_of_scope, EvalTask::region})
    CHECK(task_accuracy(preds, golds, t) == 100.0);
  CHECK(region_accuracy(preds, golds) == 100.0);
}

TEST_CASE("evaluation report") {
  const auto recs = generate_records(synthetic_descriptors(20, {"A", "B"}, 1), canonical_bank(), 2);
  std::vector<GoldValues> golds, preds;
  for (const auto& r : recs) golds.push_back(r.gold);
  preds = golds;
  for (std::size_t i = 0; i < preds.size(); i += 3) preds[i].shape = "round";
  const MetricsReport a = evaluate(preds, golds, 300, 5, 1);
  const MetricsReport b = evaluate(preds, golds, 300, 5, 4);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  REQUIRE(a.mean.has_value());
  const double m = (*a.volume.accuracy + *a.region.accuracy + *a.shape.accuracy + *a.spread.accuracy) / 4.0;
  CHECK(*a.mean == Approx(m));
  CHECK(*a.volume.accuracy == 100.0);
  CHECK(a.volume.std == 0.0);
  CHECK(*a.shape.accuracy <= 100.0);
  CHECK(a.shape.std >= 0.0);
}

TEST_CASE("prediction files") {
  const auto recs = generate_records(synthetic_descriptors(2, {"A"}, 1), canonical_bank(), 2);
  std::string text;
  for (const auto& r : recs) text += "{\"id\": \"" + r.id + "\", \"answer\": " + ojson(r.answer).dump() + "}\n";
  const auto preds = predictions_from_jsonl(text);
  const auto aligned = align_predictions(recs, preds);
  CHECK(aligned.size() == recs.size());
  CHECK_THROWS_AS(align_predictions(recs, {}), ConfigError);
  const auto structured = predictions_from_jsonl("{\"id\": \"x\", \"volume\": \"<1%\", \"region\": [\"frontal\"]}\n");
  CHECK(structured[0].values.volume == "<1%");
  CHECK(structured[0].values.regions == std::vector<std::string>{"frontal"});
  CHECK(structured[0].values.shape == "Unspecified");
}

// SPDX-License-Identifier: Apache-2.0
//
// Accuracy metrics, bootstrap spread, Cohen's kappa, the routing correlation
// heatmap, and a keyword normalizer for free-text answers.
#pragma once

#include "mpvqa/qagen.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpvqa {

enum class EvalTask { volume, region, shape, spread, out_of_scope };
std::string_view to_string(EvalTask task);

/// Predicted values use the gold vocabularies; out_of_scope doubles as the
/// abstain flag.
struct PredictionRecord {
  std::string id;
  GoldValues values;
};

/// Per-record score in [0, 1], or nullopt when the gold task is Unspecified.
/// Categorical tasks and out_of_scope score exact matches; region scores
/// exact set equality (order-insensitive).
std::optional<double> record_score(const GoldValues& pred, const GoldValues& gold, EvalTask task);

/// Region per-label score: both N/A -> 1, exactly one N/A -> 0, otherwise the
/// share of the 9 region labels whose membership agrees.
std::optional<double> region_label_score(const GoldValues& pred, const GoldValues& gold);

/// Scores of included records, in record order. Throws ConfigError when the
/// inputs are not aligned.
std::vector<double> task_scores(const std::vector<GoldValues>& preds,
                                const std::vector<GoldValues>& golds, EvalTask task);
std::vector<double> region_label_scores(const std::vector<GoldValues>& preds,
                                        const std::vector<GoldValues>& golds);

/// Percent; nullopt when no record is included.
std::optional<double> task_accuracy(const std::vector<GoldValues>& preds,
                                    const std::vector<GoldValues>& golds, EvalTask task);
std::optional<double> region_accuracy(const std::vector<GoldValues>& preds,
                                      const std::vector<GoldValues>& golds);

inline constexpr int kDefaultBootstrapResamples = 500;

/// Population standard deviation, over `resamples` with-replacement resamples
/// of the scores, of 100 * mean. Resample b draws from the stream keyed by
/// (seed, "bootstrap", b), so the result does not depend on `workers`.
double bootstrap_std(const std::vector<double>& scores, int resamples, std::uint64_t seed,
                     unsigned workers = 1);

struct KappaResult {
  double kappa = 1.0;
  double kappa_x100 = 100.0;
  /// Chance agreement was 1 (both annotators constant and equal); kappa is
  /// set to 1 by convention.
  bool degenerate = false;
};

/// Throws ConfigError when the inputs differ in length or are empty.
KappaResult cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Pearson correlation; nullopt when either vector has zero variance.
std::optional<double> pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct Heatmap {
  Eigen::MatrixXd correlation;     // k x k, symmetric, unit diagonal
  std::vector<bool> zero_variance; // per input vector; its off-diagonal row is 0
};

/// Throws ConfigError for fewer than two vectors or unequal lengths.
Heatmap routing_heatmap(const std::vector<Eigen::VectorXd>& pi_high);
std::string heatmap_csv(const Heatmap& heatmap, const std::vector<std::string>& labels);

/// Case-insensitive keyword extraction over the closed vocabularies. Tasks
/// with no match stay "Unspecified"; declining phrases set out_of_scope.
GoldValues normalize_answer(std::string_view answer);

struct TaskMetric {
  std::optional<double> accuracy;  // percent
  double std = 0;                  // bootstrap
  std::size_t n = 0;               // included records
};

struct MetricsReport {
  TaskMetric volume, region, shape, spread, out_of_scope;
  /// Mean of the volume, region, shape and spread accuracies that exist.
  std::optional<double> mean;
  std::size_t n_records = 0;
  int resamples = kDefaultBootstrapResamples;
  std::uint64_t seed = 0;
};

MetricsReport evaluate(const std::vector<GoldValues>& preds, const std::vector<GoldValues>& golds,
                       int resamples, std::uint64_t seed, unsigned workers = 1);
ojson report_to_json(const MetricsReport& report);

/// Reads prediction JSONL: each line has "id" and either structured fields
/// ("volume", "region", "shape", "spread", "out_of_scope"; missing ones are
/// Unspecified) or a free-text "answer" that goes through normalize_answer.
std::vector<PredictionRecord> predictions_from_jsonl(std::string_view text);

/// Aligns predictions to gold records by id. Throws ConfigError when a gold
/// id has no prediction.
std::vector<GoldValues> align_predictions(const std::vector<DatasetRecord>& gold,
                                          const std::vector<PredictionRecord>& preds);

}  // namespace mpvqa

// SPDX-License-Identifier: Apache-2.0
//
// Per-label task descriptors, question/answer rendering and sampling, study
// splits and corpus frequency statistics.
#pragma once

#include "mpvqa/morphology.hpp"
#include "mpvqa/random.hpp"
#include "mpvqa/regions.hpp"
#include "mpvqa/shape.hpp"
#include "mpvqa/templates.hpp"
#include "mpvqa/volume.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpvqa {

using ojson = nlohmann::ordered_json;

inline constexpr std::string_view kUnspecified = "Unspecified";
inline constexpr std::string_view kNotApplicable = "N/A";
inline constexpr int kSchemaVersion = 1;

struct TaskDescriptors {
  std::string study_id;
  std::string label_name;
  VolumeBin volume;
  RegionAssignment regions;
  ShapeCategory shape = ShapeCategory::not_applicable;
  SpreadDescriptor spread;
  // Diagnostics; not used for rendering.
  std::size_t voxels = 0;
  std::optional<ShapeMetrics> metrics;
  std::vector<std::string> warnings;

  bool present() const { return volume.category != VolumeBinCategory::not_applicable; }
};

/// All four fields N/A.
TaskDescriptors absent_descriptor(std::string study_id, std::string label_name);

ojson descriptor_to_json(const TaskDescriptors& d);
/// Reads the categorical fields (volume, regions, shape, spread); numeric
/// diagnostics are optional. Throws ConfigError on malformed input.
TaskDescriptors descriptor_from_json(const ojson& j);

struct StudyInput {
  std::string study_id;
  LabelMask segmentation;
  Volume3D brain;  // skull-stripped T1; nonzero voxels are brain
};

/// Reads "*seg.nii[.gz]" and "*t1n.nii[.gz]" (or "*t1.nii[.gz]") from a study
/// directory and conforms both to RAS at `spacing` with nearest sampling.
/// The study id is the directory name.
StudyInput load_study(const std::filesystem::path& dir, const Spacing& spacing);

struct DescriptorConfig {
  std::map<int, std::string> labels;  // label value -> clinical name
  std::size_t min_overlap_voxels = kDefaultMinOverlapVoxels;
};

/// One descriptor per configured label, in label-value order.
std::vector<TaskDescriptors> compute_descriptors(const StudyInput& study, const Atlas& atlas,
                                                 const DescriptorConfig& config);

struct QAPair {
  std::string question;
  std::string answer;
};

/// "a", "a and b", "a, b and c".
std::string join_regions(const std::vector<std::string>& regions);

/// Throws TemplateError for a placeholder the descriptor cannot fill.
QAPair render(const Template& t, const TaskDescriptors& desc);

enum class OosKind { none, partial, full };
std::string_view to_string(OosKind kind);

enum class Split { train, val, test };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct GoldValues {
  std::string volume{kUnspecified};
  std::vector<std::string> regions{std::string(kUnspecified)};  // or {"N/A"}
  std::string shape{kUnspecified};
  std::string spread{kUnspecified};
  bool out_of_scope = false;
};

bool regions_unspecified(const std::vector<std::string>& regions);
bool regions_not_applicable(const std::vector<std::string>& regions);

struct DatasetRecord {
  std::string id;  // "<study>/<label>/<k>"
  std::string study_id;
  std::string label_name;
  std::string template_id;
  TemplateKind kind = TemplateKind::multitask;
  std::string question;
  std::string answer;
  TaskSet task_set = 0;
  GoldValues gold;
  OosKind oos_kind = OosKind::none;
  Split split = Split::train;
  std::vector<std::string> warnings;
};

ojson record_to_json(const DatasetRecord& r);
DatasetRecord record_from_json(const ojson& j);

/// Indices (into bank.templates()) of 4 distinct multitask templates whose
/// task sets cover all four tasks. Uniform draw without replacement, then
/// repair: drop the pick that uniquely covers the fewest tasks (latest on a
/// tie) and redraw among templates that enlarge the union.
std::array<std::size_t, 4> choose_multitask(const TemplateBank& bank, CounterRng& rng);

/// Exactly six records: four multitask, one partial, one full out-of-scope.
/// Randomness comes from the stream keyed by (seed, study, label).
std::vector<DatasetRecord> sample_questions(const TaskDescriptors& desc, const TemplateBank& bank,
                                            std::uint64_t seed);

/// Study-level split: sorted unique ids shuffled under the seed, then
/// floor(0.8n) train, floor(0.1n) val, the rest test.
std::map<std::string, Split> split_dataset(const std::vector<std::string>& study_ids,
                                           std::uint64_t seed);

/// Samples every descriptor across `workers` threads and assigns splits.
/// Output order follows the descriptor order, whatever the worker count.
std::vector<DatasetRecord> generate_records(const std::vector<TaskDescriptors>& descriptors,
                                            const TemplateBank& bank, std::uint64_t seed,
                                            unsigned workers = 1);

struct FrequencyRow {
  std::string task;
  std::string label;
  double percent = 0;
};

struct DatasetStats {
  std::vector<FrequencyRow> rows;
  std::size_t n_questions = 0;
  std::size_t n_studies = 0;
  std::size_t n_unique_questions = 0;
  std::size_t n_unique_answers = 0;

  /// Percent for (task, label); throws ConfigError when absent.
  double percent(std::string_view task, std::string_view label) const;
};

DatasetStats compute_stats(const std::vector<DatasetRecord>& records);
/// Columns "Task,Label name,Label frequency"; summary counts follow the
/// frequency rows under task "Summary".
std::string stats_csv(const DatasetStats& stats);

std::string to_jsonl(const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> records_from_jsonl(std::string_view text);
std::vector<ojson> parse_jsonl(std::string_view text);

}  // namespace mpvqa

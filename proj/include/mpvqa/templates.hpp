// SPDX-License-Identifier: Apache-2.0
//
// Question/answer templates and the bank they are sampled from.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mpvqa {

enum class Task { volume = 0, region = 1, shape = 2, spread = 3 };

inline constexpr std::array<Task, 4> kAllTasks = {Task::volume, Task::region, Task::shape,
                                                  Task::spread};

std::string_view to_string(Task task);
/// Placeholder name without braces: volume, regions, shape, spread.
std::string_view placeholder_of(Task task);

/// Bit t set when Task t is asked.
using TaskSet = std::uint8_t;
inline constexpr TaskSet kAllTaskBits = 0x0f;
inline constexpr TaskSet task_bit(Task t) { return static_cast<TaskSet>(1u << static_cast<int>(t)); }
inline constexpr bool has_task(TaskSet s, Task t) { return (s & task_bit(t)) != 0; }
int task_count(TaskSet s);

/// "volume,region" style; "none" for the empty set.
std::string format_task_set(TaskSet s);
TaskSet parse_task_set(std::string_view text);

enum class TemplateKind { multitask, partial_oos, full_oos };

std::string_view to_string(TemplateKind kind);
TemplateKind parse_template_kind(std::string_view text);

struct Template {
  std::string id;
  TemplateKind kind = TemplateKind::multitask;
  TaskSet tasks = 0;
  std::string question;
  std::string answer;
};

/// Names between braces, in order of appearance (duplicates kept). Throws
/// TemplateError on an unterminated or nested brace.
std::vector<std::string> placeholders(std::string_view text);

/// Throws TemplateError when the template breaks a placeholder or language rule.
void validate_template(const Template& t);

/// Share of alphabetic code points that are ASCII letters; 1 when there are none.
double ascii_letter_share(std::string_view utf8);

class TemplateBank {
 public:
  TemplateBank() = default;
  TemplateBank(std::vector<Template> templates, std::string provenance);

  const std::vector<Template>& templates() const { return templates_; }
  const std::string& provenance() const { return provenance_; }
  /// Indices into templates() of one kind, in bank order.
  const std::vector<std::size_t>& of_kind(TemplateKind kind) const {
    return by_kind_[static_cast<std::size_t>(kind)];
  }

  /// Checks every template, then coverage: each of the 15 nonempty task
  /// subsets has a multitask template, and both OOS kinds are present.
  /// Throws TemplateError or BankCapacityError.
  void validate() const;

 private:
  std::vector<Template> templates_;
  std::string provenance_;
  std::array<std::vector<std::size_t>, 3> by_kind_;
};

/// Text format: '#' comments; "@kind <multitask|partial_oos|full_oos>" and
/// "@tasks <comma list|none>" set the block header; then "Q: ..." / "A: ..."
/// line pairs. Ids are "<kind>-<n>" numbered per kind from 1. The bank is
/// validated before it is returned.
TemplateBank parse_template_bank(std::string_view text, std::string provenance);

/// The shipped bank: the 15 canonical multi-task pairs plus out-of-scope sets.
const TemplateBank& canonical_bank();
std::string_view canonical_bank_text();

}  // namespace mpvqa

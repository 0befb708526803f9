// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/templates.hpp"

#include "mpvqa/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <set>
#include <sstream>

namespace mpvqa {

namespace {

constexpr std::array<std::string_view, 4> kTaskNames = {"volume", "region", "shape", "spread"};
constexpr std::array<std::string_view, 4> kPlaceholderNames = {"volume", "regions", "shape",
                                                               "spread"};
constexpr std::array<std::string_view, 3> kKindNames = {"multitask", "partial_oos", "full_oos"};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::string_view to_string(Task task) { return kTaskNames[static_cast<std::size_t>(task)]; }
std::string_view placeholder_of(Task task) {
  return kPlaceholderNames[static_cast<std::size_t>(task)];
}

int task_count(TaskSet s) { return std::popcount(static_cast<unsigned>(s & kAllTaskBits)); }

std::string format_task_set(TaskSet s) {
  std::string out;
  for (Task t : kAllTasks) {
    if (!has_task(s, t)) continue;
    if (!out.empty()) out += ',';
    out += to_string(t);
  }
  return out.empty() ? "none" : out;
}

TaskSet parse_task_set(std::string_view text) {
  std::string t = trim(text);
  if (t == "none" || t.empty()) return 0;
  TaskSet s = 0;
  std::istringstream in(t);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    auto it = std::find(kTaskNames.begin(), kTaskNames.end(), item);
    if (it == kTaskNames.end()) throw TemplateError("unknown task '" + item + "'");
    s |= task_bit(static_cast<Task>(it - kTaskNames.begin()));
  }
  return s;
}

std::string_view to_string(TemplateKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

TemplateKind parse_template_kind(std::string_view text) {
  std::string t = trim(text);
  auto it = std::find(kKindNames.begin(), kKindNames.end(), t);
  if (it == kKindNames.end()) throw TemplateError("unknown template kind '" + t + "'");
  return static_cast<TemplateKind>(it - kKindNames.begin());
}

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '}') throw TemplateError("unmatched '}' in \"" + std::string(text) + "\"");
    if (text[i] != '{') {
      ++i;
      continue;
    }
    const std::size_t close = text.find_first_of("{}", i + 1);
    if (close == std::string_view::npos || text[close] == '{') {
      throw TemplateError("unterminated '{' in \"" + std::string(text) + "\"");
    }
    out.emplace_back(text.substr(i + 1, close - i - 1));
    i = close + 1;
  }
  return out;
}

double ascii_letter_share(std::string_view utf8) {
  std::size_t ascii = 0, other = 0;
  for (std::size_t i = 0; i < utf8.size();) {
    const auto c = static_cast<unsigned char>(utf8[i]);
    if (c < 0x80) {
      if (std::isalpha(c)) ++ascii;
      ++i;
      continue;
    }
    // Multi-byte sequence: count letters outside ASCII, skip punctuation blocks
    // (general punctuation U+2000..U+206F, e.g. dashes and quotes).
    std::size_t len = c >= 0xf0 ? 4 : c >= 0xe0 ? 3 : 2;
    bool punctuation = false;
    if (len == 3 && i + 1 < utf8.size() && c == 0xe2) {
      const auto c1 = static_cast<unsigned char>(utf8[i + 1]);
      punctuation = c1 == 0x80 || c1 == 0x81;
    }
    if (c == 0xc2) punctuation = true;  // Latin-1 punctuation and symbols, incl. NBSP
    if (!punctuation) ++other;
    i += len;
  }
  if (ascii + other == 0) return 1.0;
  return static_cast<double>(ascii) / static_cast<double>(ascii + other);
}

void validate_template(const Template& t) {
  const std::string where = "template " + t.id + ": ";
  if (trim(t.question).empty() || trim(t.answer).empty()) {
    throw TemplateError(where + "empty question or answer");
  }
  const auto q = placeholders(t.question);
  const auto a = placeholders(t.answer);
  static const std::set<std::string> known = {"label", "volume", "regions", "shape", "spread"};
  for (const auto* list : {&q, &a}) {
    for (const auto& p : *list) {
      if (!known.count(p)) throw TemplateError(where + "unknown placeholder {" + p + "}");
    }
  }
  if (std::find(q.begin(), q.end(), "label") == q.end()) {
    throw TemplateError(where + "question lacks {label}");
  }
  for (const auto& p : q) {
    if (p != "label") throw TemplateError(where + "question may only use {label}, found {" + p + "}");
  }
  std::set<std::string> answer_tasks;
  bool answer_label = false;
  for (const auto& p : a) {
    if (p == "label") answer_label = true;
    else answer_tasks.insert(p);
  }
  if (t.kind == TemplateKind::full_oos) {
    if (t.tasks != 0) throw TemplateError(where + "full out-of-scope templates ask no task");
    if (!answer_tasks.empty()) throw TemplateError(where + "full out-of-scope answer uses a task placeholder");
  } else {
    if (t.tasks == 0 || (t.tasks & ~kAllTaskBits)) throw TemplateError(where + "task set must be nonempty");
    std::set<std::string> expected;
    for (Task task : kAllTasks) {
      if (has_task(t.tasks, task)) expected.emplace(placeholder_of(task));
    }
    if (answer_tasks != expected) {
      throw TemplateError(where + "answer placeholders do not match task set " +
                          format_task_set(t.tasks));
    }
    if (!answer_label) throw TemplateError(where + "answer lacks {label}");
  }
  if (ascii_letter_share(t.question) < 0.9 || ascii_letter_share(t.answer) < 0.9) {
    throw TemplateError(where + "text is not English");
  }
}

TemplateBank::TemplateBank(std::vector<Template> templates, std::string provenance)
    : templates_(std::move(templates)), provenance_(std::move(provenance)) {
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    by_kind_[static_cast<std::size_t>(templates_[i].kind)].push_back(i);
  }
}

void TemplateBank::validate() const {
  std::set<std::string> ids;
  for (const auto& t : templates_) {
    validate_template(t);
    if (!ids.insert(t.id).second) throw TemplateError("duplicate template id " + t.id);
  }
  std::array<bool, 16> seen{};
  for (std::size_t i : of_kind(TemplateKind::multitask)) seen[templates_[i].tasks] = true;
  for (unsigned s = 1; s < 16; ++s) {
    if (!seen[s]) {
      throw BankCapacityError("bank has no multitask template for {" +
                              format_task_set(static_cast<TaskSet>(s)) + "}");
    }
  }
  if (of_kind(TemplateKind::partial_oos).empty()) {
    throw BankCapacityError("bank has no partially out-of-scope template");
  }
  if (of_kind(TemplateKind::full_oos).empty()) {
    throw BankCapacityError("bank has no fully out-of-scope template");
  }
}

TemplateBank parse_template_bank(std::string_view text, std::string provenance) {
  std::vector<Template> out;
  std::array<int, 3> numbering{};
  TemplateKind kind = TemplateKind::multitask;
  TaskSet tasks = 0;
  bool have_kind = false, have_tasks = false;
  std::string pending_q;
  bool have_q = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw TemplateError(provenance + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("@kind", 0) == 0) {
      if (have_q) fail("question without answer");
      kind = parse_template_kind(line.substr(5));
      have_kind = true;
      have_tasks = kind == TemplateKind::full_oos;
      tasks = 0;
    } else if (line.rfind("@tasks", 0) == 0) {
      if (have_q) fail("question without answer");
      tasks = parse_task_set(line.substr(6));
      have_tasks = true;
    } else if (line.rfind("Q:", 0) == 0) {
      if (have_q) fail("two questions in a row");
      if (!have_kind || !have_tasks) fail("Q: before @kind/@tasks header");
      pending_q = trim(std::string_view(line).substr(2));
      have_q = true;
    } else if (line.rfind("A:", 0) == 0) {
      if (!have_q) fail("answer without question");
      Template t;
      const auto k = static_cast<std::size_t>(kind);
      t.id = std::string(to_string(kind)) + "-" + std::to_string(++numbering[k]);
      t.kind = kind;
      t.tasks = tasks;
      t.question = std::move(pending_q);
      t.answer = trim(std::string_view(line).substr(2));
      out.push_back(std::move(t));
      have_q = false;
    } else {
      fail("unrecognized line");
    }
  }
  if (have_q) fail("question without answer at end of file");
  TemplateBank bank(std::move(out), std::move(provenance));
  bank.validate();
  return bank;
}

const TemplateBank& canonical_bank() {
  static const TemplateBank bank = parse_template_bank(canonical_bank_text(), "canonical");
  return bank;
}

}  // namespace mpvqa

#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ubert/tokenizer.hpp"

namespace ubert {

enum class TaskKind { Classification, Ner, RelationExtraction, EventTrigger, EventArgument };

// Stable lowercase identifier used in files and on the command line.
std::string_view task_id(TaskKind task);
TaskKind parse_task_id(std::string_view id);
// Words placed after the [task] marker.
std::string_view task_words(TaskKind task);

struct PlainLabel {
  std::string name;
  friend auto operator<=>(const PlainLabel&, const PlainLabel&) = default;
};

struct EntityType {
  std::string name;
  friend auto operator<=>(const EntityType&, const EntityType&) = default;
};

struct RelationTriple {
  std::string head_type;
  std::string relation;
  std::string tail_type;
  friend auto operator<=>(const RelationTriple&, const RelationTriple&) = default;
};

struct EventRole {
  std::string event_type;
  std::string role;
  friend auto operator<=>(const EventRole&, const EventRole&) = default;
};

// Second-stage event category: the role query conditioned on a trigger found
// in the first stage.
struct EventRoleWithTrigger {
  std::string event_type;
  std::string trigger_text;
  std::string role;
  friend auto operator<=>(const EventRoleWithTrigger&, const EventRoleWithTrigger&) = default;
};

using CategoryLabel =
    std::variant<PlainLabel, EntityType, RelationTriple, EventRole, EventRoleWithTrigger>;

// Name components in serialization order.
std::vector<std::string> category_components(const CategoryLabel& label);

// Throws ValidationError unless every component is non-empty, has no leading
// or trailing whitespace and uses only ' ' as internal whitespace.
void validate_category(const CategoryLabel& label);

// Category segment tokens. Components are tokenized and joined by special
// ";" separators; non-special tokens carry offsets relative to the rendered
// segment ("PER ; Originator ; ORG"), which keeps the mapping injective for
// labels of one kind.
std::vector<Token> serialize_category(const CategoryLabel& label);
std::string render_category(const CategoryLabel& label);

// Whether `label` is an acceptable category for `task`.
bool category_fits_task(TaskKind task, const CategoryLabel& label);

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kTaskToken = "[task]";
inline constexpr std::string_view kCategoryToken = "[category]";
inline constexpr std::string_view kTextToken = "[text]";
inline constexpr std::string_view kSeparatorToken = ";";

// One input unit: [CLS] [task] t [category] c [text] s.
struct SchemaInstance {
  TaskKind task = TaskKind::Classification;
  CategoryLabel category;
  std::string text;
  // Whole unit; non-special offsets index into tokens.source_text, the
  // rendered unit string.
  TokenSequence tokens;
  // Tokenization of `text` alone; offsets index into `text`.
  TokenSequence text_tokens;
  std::size_t text_token_offset = 0;

  std::size_t length() const noexcept { return tokens.size(); }
  std::size_t text_length() const noexcept { return text_tokens.size(); }
};

struct SchemaBatch {
  TaskKind task = TaskKind::Classification;
  std::string shared_text;
  std::vector<SchemaInstance> instances;
};

SchemaInstance build_instance(TaskKind task, const CategoryLabel& category,
                              std::string_view text);

SchemaBatch build_batch(TaskKind task, const std::vector<CategoryLabel>& categories,
                        std::string_view text);

}  // namespace ubert

#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ubert/schema.hpp"
#include "ubert/tokenizer.hpp"

namespace ubert {

enum class TableRole { Single, HeadEntity, TailEntity, Coupling, Trigger, Argument };

std::string_view table_role_name(TableRole role);
// Single, HeadEntity, TailEntity, Trigger and Argument tables hold spans and
// are upper-triangular; Coupling tables are not.
constexpr bool is_span_role(TableRole role) { return role != TableRole::Coupling; }

// l x l grid, row = head (start) token, column = tail (end) token, both in
// unit coordinates. Holds logits for model output or 0/1 for targets.
class StructureTable {
 public:
  StructureTable() = default;
  StructureTable(std::size_t size, TableRole role, double fill = 0.0)
      : size_(size), role_(role), cells_(size * size, fill) {}

  std::size_t size() const noexcept { return size_; }
  TableRole role() const noexcept { return role_; }
  double& at(std::size_t row, std::size_t col) { return cells_[row * size_ + col]; }
  double at(std::size_t row, std::size_t col) const { return cells_[row * size_ + col]; }
  std::vector<double>& cells() noexcept { return cells_; }
  const std::vector<double>& cells() const noexcept { return cells_; }

  friend bool operator==(const StructureTable&, const StructureTable&) = default;

 private:
  std::size_t size_ = 0;
  TableRole role_ = TableRole::Single;
  std::vector<double> cells_;
};

struct LocatingDesignator {
  std::size_t row = 0;
  std::size_t col = 0;
  TableRole table_role = TableRole::Single;

  friend auto operator<=>(const LocatingDesignator&, const LocatingDesignator&) = default;
};

// Annotation spans are inclusive token indices relative to the raw-text
// block, so one annotation applies to every instance of a batch even when
// their prefixes differ in length.
struct LabelFlag {
  bool applies = false;
  friend auto operator<=>(const LabelFlag&, const LabelFlag&) = default;
};

struct EntitySet {
  std::set<TokenSpan> spans;
  friend auto operator<=>(const EntitySet&, const EntitySet&) = default;
};

struct Relation {
  TokenSpan head;
  TokenSpan tail;
  friend auto operator<=>(const Relation&, const Relation&) = default;
};

struct RelationSet {
  std::set<Relation> relations;
  friend auto operator<=>(const RelationSet&, const RelationSet&) = default;
};

struct EventArgument {
  std::string role;
  TokenSpan span;
  friend auto operator<=>(const EventArgument&, const EventArgument&) = default;
};

struct EventStructure {
  TokenSpan trigger;
  std::set<EventArgument> args;
  friend auto operator<=>(const EventStructure&, const EventStructure&) = default;
};

using Annotation = std::variant<LabelFlag, EntitySet, RelationSet, EventStructure>;

// Throws AlignmentError unless every span has first <= last < text_length.
void validate_annotation(const Annotation& annotation, std::size_t text_length);

// Raw-text token span shifted into unit coordinates and back.
TokenSpan to_unit(const SchemaInstance& instance, TokenSpan text_span);

// Text covered by a raw-text token span.
std::string span_text(const SchemaInstance& instance, TokenSpan text_span);

StructureTable encode_classification(bool applies, const SchemaInstance& instance);
StructureTable encode_ner(const EntitySet& spans, const SchemaInstance& instance,
                          TableRole role = TableRole::Single);

struct RelationTables {
  StructureTable head;
  StructureTable tail;
  StructureTable coupling;
};
RelationTables encode_relation(const RelationSet& relations, const SchemaInstance& instance);

struct EventTables {
  StructureTable trigger;
  std::vector<StructureTable> arguments;  // parallel to the argument instances
};
// Argument instances must carry EventRoleWithTrigger categories whose
// trigger text equals the text of ev.trigger. Throws CoverageError when a
// role of ev has no instance.
EventTables encode_event(const EventStructure& ev, const SchemaInstance& trigger_instance,
                         const std::vector<SchemaInstance>& argument_instances);

// Maps a 0/1 target table to logits of -magnitude / +magnitude.
StructureTable targets_to_logits(const StructureTable& targets, double magnitude = 10.0);

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Cells with sigmoid(score) > threshold inside the raw-text block (rows and
// columns >= text_offset); span roles additionally require row <= col.
// Output is row-major ordered.
std::vector<LocatingDesignator> decode_table(const StructureTable& scores, double threshold,
                                             std::size_t text_offset);

bool decode_classification(const StructureTable& scores, double threshold);
EntitySet decode_ner(const StructureTable& scores, const SchemaInstance& instance,
                     double threshold);
// A relation (h, t) is emitted iff h is a head span, t is a tail span and the
// coupling table activates both (start_h, start_t) and (end_h, end_t).
RelationSet decode_relation(const StructureTable& head, const StructureTable& tail,
                            const StructureTable& coupling, const SchemaInstance& instance,
                            double threshold);
// Second stage: argument spans for a known trigger.
EventStructure decode_event_arguments(TokenSpan trigger,
                                      const std::vector<StructureTable>& argument_scores,
                                      const std::vector<SchemaInstance>& argument_instances,
                                      double threshold);

// True when distinct relation sets could produce the same three tables,
// i.e. decoding the encoded set does not give the set back.
bool is_coupling_ambiguous(const RelationSet& relations, const SchemaInstance& instance);

}  // namespace ubert

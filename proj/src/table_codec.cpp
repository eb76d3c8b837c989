#include "ubert/table_codec.hpp"

#include <algorithm>
#include <map>

#include "ubert/errors.hpp"

namespace ubert {
namespace {

void check_span(TokenSpan span, std::size_t text_length) {
  if (span.first > span.last || span.last >= text_length) {
    throw AlignmentError("span (" + std::to_string(span.first) + ", " +
                         std::to_string(span.last) + ") is outside the text block of " +
                         std::to_string(text_length) + " tokens");
  }
}

void mark(StructureTable& table, std::size_t row, std::size_t col) { table.at(row, col) = 1.0; }

bool active(double score, double threshold) { return sigmoid(score) > threshold; }

std::string argument_role(const SchemaInstance& inst) {
  if (const auto* c = std::get_if<EventRoleWithTrigger>(&inst.category)) return c->role;
  if (const auto* c = std::get_if<EventRole>(&inst.category)) return c->role;
  throw ValidationError("argument instance category '" + render_category(inst.category) +
                        "' carries no event role");
}

}  // namespace

std::string_view table_role_name(TableRole role) {
  switch (role) {
    case TableRole::Single: return "single";
    case TableRole::HeadEntity: return "head";
    case TableRole::TailEntity: return "tail";
    case TableRole::Coupling: return "coupling";
    case TableRole::Trigger: return "trigger";
    case TableRole::Argument: return "argument";
  }
  return "unknown";
}

void validate_annotation(const Annotation& annotation, std::size_t text_length) {
  struct Visitor {
    std::size_t n;
    void operator()(const LabelFlag&) const {}
    void operator()(const EntitySet& a) const {
      for (const TokenSpan& s : a.spans) check_span(s, n);
    }
    void operator()(const RelationSet& a) const {
      for (const Relation& r : a.relations) {
        check_span(r.head, n);
        check_span(r.tail, n);
      }
    }
    void operator()(const EventStructure& a) const {
      check_span(a.trigger, n);
      for (const EventArgument& arg : a.args) {
        if (arg.role.empty()) throw ValidationError("event argument has an empty role");
        check_span(arg.span, n);
      }
    }
  };
  std::visit(Visitor{text_length}, annotation);
}

TokenSpan to_unit(const SchemaInstance& instance, TokenSpan text_span) {
  check_span(text_span, instance.text_length());
  return {text_span.first + instance.text_token_offset, text_span.last + instance.text_token_offset};
}

std::string span_text(const SchemaInstance& instance, TokenSpan text_span) {
  const auto [begin, end] = char_span_of_token_span(instance.text_tokens, text_span);
  return instance.text.substr(begin, end - begin);
}

StructureTable encode_classification(bool applies, const SchemaInstance& instance) {
  StructureTable table(instance.length(), TableRole::Single);
  if (applies) mark(table, 0, 0);
  return table;
}

StructureTable encode_ner(const EntitySet& spans, const SchemaInstance& instance, TableRole role) {
  StructureTable table(instance.length(), role);
  for (const TokenSpan& s : spans.spans) {
    const TokenSpan u = to_unit(instance, s);
    mark(table, u.first, u.last);
  }
  return table;
}

RelationTables encode_relation(const RelationSet& relations, const SchemaInstance& instance) {
  const std::size_t l = instance.length();
  RelationTables out{StructureTable(l, TableRole::HeadEntity),
                     StructureTable(l, TableRole::TailEntity),
                     StructureTable(l, TableRole::Coupling)};
  for (const Relation& r : relations.relations) {
    const TokenSpan h = to_unit(instance, r.head);
    const TokenSpan t = to_unit(instance, r.tail);
    mark(out.head, h.first, h.last);
    mark(out.tail, t.first, t.last);
    mark(out.coupling, h.first, t.first);
    mark(out.coupling, h.last, t.last);
  }
  return out;
}

EventTables encode_event(const EventStructure& ev, const SchemaInstance& trigger_instance,
                         const std::vector<SchemaInstance>& argument_instances) {
  EventTables out;
  out.trigger = encode_ner(EntitySet{{ev.trigger}}, trigger_instance, TableRole::Trigger);

  const std::string trigger = span_text(trigger_instance, ev.trigger);
  std::map<std::string, EntitySet> by_role;
  for (const EventArgument& arg : ev.args) by_role[arg.role].spans.insert(arg.span);

  std::set<std::string> covered;
  for (const SchemaInstance& inst : argument_instances) {
    if (const auto* c = std::get_if<EventRoleWithTrigger>(&inst.category)) {
      if (c->trigger_text != trigger) {
        throw ValidationError("argument instance trigger '" + c->trigger_text +
                              "' does not match event trigger '" + trigger + "'");
      }
    }
    const std::string role = argument_role(inst);
    covered.insert(role);
    auto it = by_role.find(role);
    out.arguments.push_back(encode_ner(it == by_role.end() ? EntitySet{} : it->second, inst,
                                       TableRole::Argument));
  }

  std::string missing;
  for (const auto& [role, spans] : by_role) {
    if (!covered.count(role)) missing += (missing.empty() ? "" : ", ") + role;
  }
  if (!missing.empty()) throw CoverageError("no argument instance for roles: " + missing);
  return out;
}

StructureTable targets_to_logits(const StructureTable& targets, double magnitude) {
  StructureTable out = targets;
  for (double& v : out.cells()) v = v > 0.5 ? magnitude : -magnitude;
  return out;
}

std::vector<LocatingDesignator> decode_table(const StructureTable& scores, double threshold,
                                             std::size_t text_offset) {
  std::vector<LocatingDesignator> out;
  const std::size_t l = scores.size();
  const bool span = is_span_role(scores.role());
  for (std::size_t r = text_offset; r < l; ++r) {
    for (std::size_t c = span ? r : text_offset; c < l; ++c) {
      if (active(scores.at(r, c), threshold)) out.push_back({r, c, scores.role()});
    }
  }
  return out;
}

bool decode_classification(const StructureTable& scores, double threshold) {
  return scores.size() > 0 && active(scores.at(0, 0), threshold);
}

EntitySet decode_ner(const StructureTable& scores, const SchemaInstance& instance,
                     double threshold) {
  EntitySet out;
  const std::size_t off = instance.text_token_offset;
  for (const LocatingDesignator& d : decode_table(scores, threshold, off)) {
    out.spans.insert(TokenSpan{d.row - off, d.col - off});
  }
  return out;
}

RelationSet decode_relation(const StructureTable& head, const StructureTable& tail,
                            const StructureTable& coupling, const SchemaInstance& instance,
                            double threshold) {
  if (head.size() != tail.size() || head.size() != coupling.size()) {
    throw ValidationError("relation tables differ in size");
  }
  const std::size_t off = instance.text_token_offset;
  const EntitySet heads = decode_ner(head, instance, threshold);
  const EntitySet tails = decode_ner(tail, instance, threshold);
  RelationSet out;
  for (const TokenSpan& h : heads.spans) {
    for (const TokenSpan& t : tails.spans) {
      if (active(coupling.at(h.first + off, t.first + off), threshold) &&
          active(coupling.at(h.last + off, t.last + off), threshold)) {
        out.relations.insert(Relation{h, t});
      }
    }
  }
  return out;
}

EventStructure decode_event_arguments(TokenSpan trigger,
                                      const std::vector<StructureTable>& argument_scores,
                                      const std::vector<SchemaInstance>& argument_instances,
                                      double threshold) {
  if (argument_scores.size() != argument_instances.size()) {
    throw ValidationError("argument tables and instances differ in count");
  }
  EventStructure out;
  out.trigger = trigger;
  for (std::size_t k = 0; k < argument_scores.size(); ++k) {
    const std::string role = argument_role(argument_instances[k]);
    for (const TokenSpan& s : decode_ner(argument_scores[k], argument_instances[k], threshold).spans) {
      out.args.insert(EventArgument{role, s});
    }
  }
  return out;
}

bool is_coupling_ambiguous(const RelationSet& relations, const SchemaInstance& instance) {
  const RelationTables t = encode_relation(relations, instance);
  return decode_relation(targets_to_logits(t.head), targets_to_logits(t.tail),
                         targets_to_logits(t.coupling), instance, 0.5) != relations;
}

}  // namespace ubert

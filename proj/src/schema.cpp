#include "ubert/schema.hpp"

#include <algorithm>
#include <set>

#include "ubert/errors.hpp"

namespace ubert {

std::string_view task_id(TaskKind task) {
  switch (task) {
    case TaskKind::Classification: return "classification";
    case TaskKind::Ner: return "ner";
    case TaskKind::RelationExtraction: return "relation";
    case TaskKind::EventTrigger: return "event_trigger";
    case TaskKind::EventArgument: return "event_argument";
  }
  return "unknown";
}

TaskKind parse_task_id(std::string_view id) {
  for (TaskKind t : {TaskKind::Classification, TaskKind::Ner, TaskKind::RelationExtraction,
                     TaskKind::EventTrigger, TaskKind::EventArgument}) {
    if (task_id(t) == id) return t;
  }
  throw ValidationError("unknown task '" + std::string(id) + "'");
}

std::string_view task_words(TaskKind task) {
  switch (task) {
    case TaskKind::Classification: return "classification";
    case TaskKind::Ner: return "ner";
    case TaskKind::RelationExtraction: return "relation extraction";
    case TaskKind::EventTrigger: return "event trigger";
    case TaskKind::EventArgument: return "event argument";
  }
  return "";
}

std::vector<std::string> category_components(const CategoryLabel& label) {
  struct Visitor {
    std::vector<std::string> operator()(const PlainLabel& l) const { return {l.name}; }
    std::vector<std::string> operator()(const EntityType& l) const { return {l.name}; }
    std::vector<std::string> operator()(const RelationTriple& l) const {
      return {l.head_type, l.relation, l.tail_type};
    }
    std::vector<std::string> operator()(const EventRole& l) const {
      return {l.event_type, l.role};
    }
    std::vector<std::string> operator()(const EventRoleWithTrigger& l) const {
      return {l.event_type, l.trigger_text, l.role};
    }
  };
  return std::visit(Visitor{}, label);
}

void validate_category(const CategoryLabel& label) {
  for (const std::string& c : category_components(label)) {
    if (c.empty()) throw ValidationError("category component is empty");
    auto is_ws = [](char ch) { return ch == ' ' || (ch >= '\t' && ch <= '\r'); };
    if (is_ws(c.front()) || is_ws(c.back())) {
      throw ValidationError("category component '" + c + "' has surrounding whitespace");
    }
    if (std::any_of(c.begin(), c.end(), [&](char ch) { return ch != ' ' && is_ws(ch); })) {
      throw ValidationError("category component '" + c + "' contains non-space whitespace");
    }
    if (tokenize(c).tokens.empty()) {
      throw ValidationError("category component '" + c + "' has no tokens");
    }
  }
}

std::string render_category(const CategoryLabel& label) {
  std::string out;
  for (const std::string& c : category_components(label)) {
    if (!out.empty()) out += " ; ";
    out += c;
  }
  return out;
}

std::vector<Token> serialize_category(const CategoryLabel& label) {
  std::vector<Token> out;
  std::size_t base = 0;
  bool first = true;
  for (const std::string& c : category_components(label)) {
    if (!first) {
      out.push_back(Token::special(std::string(kSeparatorToken)));
      base += 3;  // " ; "
    }
    first = false;
    for (Token t : tokenize(c).tokens) {
      t.char_start += base;
      t.char_end += base;
      out.push_back(std::move(t));
    }
    base += c.size();
  }
  return out;
}

bool category_fits_task(TaskKind task, const CategoryLabel& label) {
  switch (task) {
    case TaskKind::Classification: return std::holds_alternative<PlainLabel>(label);
    case TaskKind::Ner: return std::holds_alternative<EntityType>(label);
    case TaskKind::RelationExtraction: return std::holds_alternative<RelationTriple>(label);
    case TaskKind::EventTrigger:
      // Event types for the trigger stage; EventRole entries declare the
      // role inventory of a record and never become trigger instances.
      return std::holds_alternative<PlainLabel>(label) ||
             std::holds_alternative<EventRole>(label);
    case TaskKind::EventArgument:
      return std::holds_alternative<EventRoleWithTrigger>(label) ||
             std::holds_alternative<EventRole>(label);
  }
  return false;
}

SchemaInstance build_instance(TaskKind task, const CategoryLabel& category,
                              std::string_view text) {
  if (text.empty()) throw ValidationError("schema text is empty");
  validate_category(category);
  if (!category_fits_task(task, category)) {
    throw ValidationError("category '" + render_category(category) + "' does not fit task " +
                          std::string(task_id(task)));
  }

  SchemaInstance inst;
  inst.task = task;
  inst.category = category;
  inst.text = std::string(text);
  inst.text_tokens = tokenize(text);
  if (inst.text_tokens.tokens.empty()) throw ValidationError("schema text has no tokens");

  std::string rendered;
  std::vector<Token>& toks = inst.tokens.tokens;
  auto add_special = [&](std::string_view marker) {
    if (!rendered.empty()) rendered += ' ';
    rendered += marker;
    toks.push_back(Token::special(std::string(marker)));
    rendered += ' ';
  };
  auto add_segment = [&](const std::vector<Token>& segment, std::string_view segment_text) {
    const std::size_t base = rendered.size();
    for (Token t : segment) {
      if (!t.is_special) {
        t.char_start += base;
        t.char_end += base;
      }
      toks.push_back(std::move(t));
    }
    rendered += segment_text;
  };

  add_special(kClsToken);
  rendered.pop_back();
  add_special(kTaskToken);
  add_segment(tokenize(task_words(task)).tokens, task_words(task));
  add_special(kCategoryToken);
  add_segment(serialize_category(category), render_category(category));
  add_special(kTextToken);
  inst.text_token_offset = toks.size();
  add_segment(inst.text_tokens.tokens, text);
  inst.tokens.source_text = std::move(rendered);
  return inst;
}

SchemaBatch build_batch(TaskKind task, const std::vector<CategoryLabel>& categories,
                        std::string_view text) {
  if (categories.empty()) throw ValidationError("batch needs at least one category");
  std::set<CategoryLabel> seen;
  for (const CategoryLabel& c : categories) {
    if (!seen.insert(c).second) {
      throw ValidationError("duplicate category '" + render_category(c) + "' in batch");
    }
  }
  SchemaBatch batch;
  batch.task = task;
  batch.shared_text = std::string(text);
  batch.instances.reserve(categories.size());
  for (const CategoryLabel& c : categories) batch.instances.push_back(build_instance(task, c, text));
  return batch;
}

}  // namespace ubert

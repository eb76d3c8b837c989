#include "ubert/data_io.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ubert/config_io.hpp"
#include "ubert/errors.hpp"
#include "ubert/random.hpp"

namespace ubert {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Validation and record helpers

namespace {

[[noreturn]] void bad_record(const std::string& what) { throw ValidationError(what); }

bool annotation_fits(TaskKind task, const Annotation& a) {
  switch (task) {
    case TaskKind::Classification: return std::holds_alternative<LabelFlag>(a);
    case TaskKind::Ner: return std::holds_alternative<EntitySet>(a);
    case TaskKind::RelationExtraction: return std::holds_alternative<RelationSet>(a);
    case TaskKind::EventTrigger: return std::holds_alternative<EventStructure>(a);
    case TaskKind::EventArgument: return false;
  }
  return false;
}

}  // namespace

void validate_record(const DatasetRecord& record) {
  if (record.task == TaskKind::EventArgument) {
    bad_record("event_argument is derived from event_trigger records and cannot be stored");
  }
  if (record.text.empty()) bad_record("record text is empty");
  const std::size_t n = tokenize(record.text).size();
  if (n == 0) bad_record("record text has no tokens");
  if (primary_categories(record).empty()) bad_record("record has no categories");
  std::set<CategoryLabel> seen;
  for (const CategoryLabel& c : record.categories) {
    validate_category(c);
    if (!category_fits_task(record.task, c)) {
      bad_record("category '" + render_category(c) + "' does not fit task " +
                 std::string(task_id(record.task)));
    }
    if (!seen.insert(c).second) bad_record("duplicate category '" + render_category(c) + "'");
  }
  for (const auto& [category, annotation] : record.gold) {
    if (!seen.count(category)) {
      bad_record("gold category '" + render_category(category) + "' is not listed in categories");
    }
    if (!annotation_fits(record.task, annotation)) {
      bad_record("gold for '" + render_category(category) + "' has the wrong annotation kind");
    }
    validate_annotation(annotation, n);
    if (const auto* ev = std::get_if<EventStructure>(&annotation)) {
      const auto* type = std::get_if<PlainLabel>(&category);
      if (!type) bad_record("event gold must be keyed by an event-type label");
      const auto roles = event_roles(record, type->name);
      for (const EventArgument& arg : ev->args) {
        if (std::find(roles.begin(), roles.end(), arg.role) == roles.end()) {
          bad_record("event role '" + arg.role + "' is not declared for '" + type->name + "'");
        }
      }
    }
  }
}

std::vector<CategoryLabel> primary_categories(const DatasetRecord& record) {
  std::vector<CategoryLabel> out;
  for (const CategoryLabel& c : record.categories) {
    if (record.task == TaskKind::EventTrigger && !std::holds_alternative<PlainLabel>(c)) continue;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> event_roles(const DatasetRecord& record, const std::string& event_type) {
  std::vector<std::string> out;
  for (const CategoryLabel& c : record.categories) {
    if (const auto* r = std::get_if<EventRole>(&c); r && r->event_type == event_type) {
      out.push_back(r->role);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON mapping

std::string category_key(const CategoryLabel& label) {
  static constexpr std::array<std::string_view, 5> kinds = {"label", "entity", "triple",
                                                            "event_role", "event_role_trigger"};
  std::string key(kinds[label.index()]);
  key += ':';
  bool first = true;
  for (const std::string& c : category_components(label)) {
    if (!first) key += '|';
    first = false;
    for (char ch : c) {
      if (ch == '|' || ch == '\\') key += '\\';
      key += ch;
    }
  }
  return key;
}

namespace {

json category_to_json(const CategoryLabel& label) {
  struct Visitor {
    json operator()(const PlainLabel& l) const { return {{"kind", "label"}, {"name", l.name}}; }
    json operator()(const EntityType& l) const { return {{"kind", "entity"}, {"name", l.name}}; }
    json operator()(const RelationTriple& l) const {
      return {{"kind", "triple"}, {"head", l.head_type}, {"relation", l.relation}, {"tail", l.tail_type}};
    }
    json operator()(const EventRole& l) const {
      return {{"kind", "event_role"}, {"event_type", l.event_type}, {"role", l.role}};
    }
    json operator()(const EventRoleWithTrigger& l) const {
      return {{"kind", "event_role_trigger"},
              {"event_type", l.event_type},
              {"trigger", l.trigger_text},
              {"role", l.role}};
    }
  };
  return std::visit(Visitor{}, label);
}

struct Reader {
  std::size_t line;

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw FormatError("field '" + field + "': " + what, line);
  }

  const json& member(const json& obj, const std::string& field) const {
    if (!obj.is_object()) fail(field, "parent is not an object");
    auto it = obj.find(field);
    if (it == obj.end()) fail(field, "missing");
    return *it;
  }

  std::string string(const json& obj, const std::string& field) const {
    const json& v = member(obj, field);
    if (!v.is_string()) fail(field, "expected a string");
    return v.get<std::string>();
  }

  CategoryLabel category(const json& j) const {
    const std::string kind = string(j, "kind");
    if (kind == "label") return PlainLabel{string(j, "name")};
    if (kind == "entity") return EntityType{string(j, "name")};
    if (kind == "triple") return RelationTriple{string(j, "head"), string(j, "relation"), string(j, "tail")};
    if (kind == "event_role") return EventRole{string(j, "event_type"), string(j, "role")};
    if (kind == "event_role_trigger") {
      return EventRoleWithTrigger{string(j, "event_type"), string(j, "trigger"), string(j, "role")};
    }
    fail("kind", "unknown category kind '" + kind + "'");
  }

  std::pair<std::size_t, std::size_t> char_span(const json& j, const std::string& field) const {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
      fail(field, "expected [char_start, char_end]");
    }
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
  }

  TokenSpan span(const json& j, const std::string& field, const TokenSequence& tokens) const {
    const auto [b, e] = char_span(j, field);
    try {
      return token_span_of_char_span(tokens, b, e);
    } catch (const AlignmentError& err) {
      throw AlignmentError("line " + std::to_string(line) + ": field '" + field + "': " + err.what());
    }
  }

  Annotation annotation(TaskKind task, const json& j, const TokenSequence& tokens) const {
    switch (task) {
      case TaskKind::Classification: {
        const json& v = member(j, "applies");
        if (!v.is_boolean()) fail("applies", "expected a boolean");
        return LabelFlag{v.get<bool>()};
      }
      case TaskKind::Ner: {
        EntitySet out;
        const json& spans = member(j, "spans");
        if (!spans.is_array()) fail("spans", "expected an array");
        for (const json& s : spans) out.spans.insert(span(s, "spans", tokens));
        return out;
      }
      case TaskKind::RelationExtraction: {
        RelationSet out;
        const json& rels = member(j, "relations");
        if (!rels.is_array()) fail("relations", "expected an array");
        for (const json& r : rels) {
          out.relations.insert(Relation{span(member(r, "head"), "head", tokens),
                                span(member(r, "tail"), "tail", tokens)});
        }
        return out;
      }
      case TaskKind::EventTrigger: {
        EventStructure out;
        out.trigger = span(member(j, "trigger"), "trigger", tokens);
        const json& args = member(j, "args");
        if (!args.is_array()) fail("args", "expected an array");
        for (const json& a : args) {
          out.args.insert(EventArgument{string(a, "role"), span(member(a, "span"), "span", tokens)});
        }
        return out;
      }
      case TaskKind::EventArgument: break;
    }
    fail("task", "task cannot carry gold annotations");
  }
};

json span_json(const TokenSequence& tokens, TokenSpan s) {
  const auto [b, e] = char_span_of_token_span(tokens, s);
  return json::array({b, e});
}

json annotation_to_json(const Annotation& a, const TokenSequence& tokens) {
  struct Visitor {
    const TokenSequence& t;
    json operator()(const LabelFlag& f) const { return {{"applies", f.applies}}; }
    json operator()(const EntitySet& e) const {
      json spans = json::array();
      for (const TokenSpan& s : e.spans) spans.push_back(span_json(t, s));
      return {{"spans", spans}};
    }
    json operator()(const RelationSet& r) const {
      json rels = json::array();
      for (const Relation& rel : r.relations) {
        rels.push_back({{"head", span_json(t, rel.head)}, {"tail", span_json(t, rel.tail)}});
      }
      return {{"relations", rels}};
    }
    json operator()(const EventStructure& ev) const {
      json args = json::array();
      for (const EventArgument& a : ev.args) {
        args.push_back({{"role", a.role}, {"span", span_json(t, a.span)}});
      }
      return {{"trigger", span_json(t, ev.trigger)}, {"args", args}};
    }
  };
  return std::visit(Visitor{tokens}, a);
}

}  // namespace

std::string category_to_json_string(const CategoryLabel& label) { return category_to_json(label).dump(); }

std::string annotation_to_json_string(const Annotation& annotation, const std::string& text) {
  return annotation_to_json(annotation, tokenize(text)).dump();
}

std::string record_to_json_line(const DatasetRecord& record) {
  const TokenSequence tokens = tokenize(record.text);
  json categories = json::array();
  for (const CategoryLabel& c : record.categories) categories.push_back(category_to_json(c));
  json gold = json::object();
  for (const auto& [c, a] : record.gold) gold[category_key(c)] = annotation_to_json(a, tokens);
  json j = {{"task", task_id(record.task)}, {"text", record.text}, {"categories", categories}, {"gold", gold}};
  return j.dump();
}

DatasetRecord record_from_json_line(const std::string& text, std::size_t line) {
  const Reader rd{line};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw FormatError("record is not a JSON object", line);

  DatasetRecord rec;
  try {
    rec.task = parse_task_id(rd.string(j, "task"));
  } catch (const FormatError&) {
    throw;
  } catch (const ValidationError& e) {
    rd.fail("task", e.what());
  }
  rec.text = rd.string(j, "text");
  const json& cats = rd.member(j, "categories");
  if (!cats.is_array()) rd.fail("categories", "expected an array");
  std::map<std::string, CategoryLabel> by_key;
  for (const json& c : cats) {
    rec.categories.push_back(rd.category(c));
    by_key.emplace(category_key(rec.categories.back()), rec.categories.back());
  }
  const TokenSequence tokens = tokenize(rec.text);
  const json& gold = rd.member(j, "gold");
  if (!gold.is_object()) rd.fail("gold", "expected an object keyed by category");
  for (const auto& [key, value] : gold.items()) {
    auto it = by_key.find(key);
    if (it == by_key.end()) rd.fail("gold", "key '" + key + "' names no listed category");
    rec.gold.emplace(it->second, rd.annotation(rec.task, value, tokens));
  }
  try {
    validate_record(rec);
  } catch (const AlignmentError& e) {
    throw AlignmentError("line " + std::to_string(line) + ": " + e.what());
  } catch (const FormatError&) {
    throw;
  } catch (const ValidationError& e) {
    throw FormatError(std::string("field 'gold': ") + e.what(), line);
  }
  return rec;
}

void save_dataset(const std::vector<DatasetRecord>& records, std::ostream& out) {
  for (const DatasetRecord& r : records) out << record_to_json_line(r) << '\n';
}

void save_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  save_dataset(records, out);
  if (!out) throw ValidationError("failed writing " + path.string());
}

std::vector<DatasetRecord> load_dataset(std::istream& in) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(record_from_json_line(line, n));
  }
  return out;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return load_dataset(in);
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> entries) {
  if (entries.empty()) entries = {"@@[PAD]", "@@[UNK]"};
  if (entries.size() < 2 || entries[0] != "@@[PAD]" || entries[1] != "@@[UNK]") {
    throw ValidationError("vocabulary must start with the padding and unknown entries");
  }
  for (std::string& e : entries) {
    if (!index_.emplace(e, entries_.size()).second) {
      throw ValidationError("duplicate vocabulary entry '" + e + "'");
    }
    entries_.push_back(std::move(e));
  }
}

std::string Vocabulary::key(const Token& token) {
  return token.is_special ? "@@" + token.text : token.text;
}

std::size_t Vocabulary::add(const std::string& key) {
  auto [it, inserted] = index_.emplace(key, entries_.size());
  if (inserted) entries_.push_back(key);
  return it->second;
}

std::size_t Vocabulary::id(const Token& token) const {
  auto it = index_.find(key(token));
  return it == index_.end() ? kUnknown : it->second;
}

std::vector<std::size_t> Vocabulary::ids(const TokenSequence& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens.tokens) out.push_back(id(t));
  return out;
}

Vocabulary build_vocabulary(const std::vector<DatasetRecord>& records) {
  Vocabulary v;
  for (std::string_view s : {kClsToken, kTaskToken, kCategoryToken, kTextToken, kSeparatorToken}) {
    v.add(Vocabulary::key(Token::special(std::string(s))));
  }
  for (TaskKind t : {TaskKind::Classification, TaskKind::Ner, TaskKind::RelationExtraction,
                     TaskKind::EventTrigger, TaskKind::EventArgument}) {
    for (const Token& tok : tokenize(task_words(t)).tokens) v.add(Vocabulary::key(tok));
  }
  for (const DatasetRecord& r : records) {
    for (const CategoryLabel& c : r.categories) {
      for (const Token& tok : serialize_category(c)) v.add(Vocabulary::key(tok));
    }
    for (const Token& tok : tokenize(r.text).tokens) v.add(Vocabulary::key(tok));
  }
  return v;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

void SyntheticSpec::validate() const {
  if (vocab_size == 0 || num_records == 0 || max_text_len == 0 || num_categories == 0) {
    throw ValidationError("synthetic spec fields must all be positive");
  }
  if (task == TaskKind::EventArgument) {
    throw ValidationError("synthetic event corpora use task event_trigger");
  }
}

namespace {

std::string indexed(std::string_view stem, std::size_t i) { return std::string(stem) + std::to_string(i); }

std::string pick_name(const std::vector<std::string>& names, std::size_t k, std::string_view stem) {
  return k < names.size() ? names[k] : indexed(stem, k);
}

struct WordPool {
  std::vector<std::string> words;
  const std::string& draw(Rng& rng) const { return words[uniform_index(rng, words.size())]; }
};

WordPool pool(std::string_view stem, std::size_t n) {
  WordPool p;
  for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) p.words.push_back(indexed(stem, i));
  return p;
}

std::size_t draw_length(Rng& rng, std::size_t lo, std::size_t max_len) {
  const std::size_t hi = std::max(lo, max_len);
  return lo + uniform_index(rng, hi - lo + 1);
}

// Text plus per-token category index (or -1).
struct Draft {
  std::vector<std::string> words;
  std::string text() const {
    std::string s;
    for (const std::string& w : words) {
      if (!s.empty()) s += ' ';
      s += w;
    }
    return s;
  }
};

template <typename Pred>
std::set<TokenSpan> positions_where(const Draft& d, Pred pred) {
  std::set<TokenSpan> out;
  for (std::size_t i = 0; i < d.words.size(); ++i) {
    if (pred(d.words[i])) out.insert(TokenSpan{i, i});
  }
  return out;
}

bool in_pool(const WordPool& p, const std::string& w) {
  return std::find(p.words.begin(), p.words.end(), w) != p.words.end();
}

std::vector<DatasetRecord> generate_ner(const SyntheticSpec& spec, Rng& rng) {
  static const std::vector<std::string> names = {"person", "location", "organization", "product",
                                                 "date", "money", "event", "work of art"};
  const std::size_t k = spec.num_categories;
  const std::size_t per = std::max<std::size_t>(1, spec.vocab_size / (2 * k));
  std::vector<WordPool> markers;
  for (std::size_t c = 0; c < k; ++c) markers.push_back(pool("m" + std::to_string(c) + "x", per));
  const WordPool fillers = pool("w", spec.vocab_size > k * per ? spec.vocab_size - k * per : 1);

  std::vector<CategoryLabel> cats;
  for (std::size_t c = 0; c < k; ++c) cats.push_back(EntityType{pick_name(names, c, "type")});

  std::vector<DatasetRecord> out;
  for (std::size_t n = 0; n < spec.num_records; ++n) {
    Draft d;
    const std::size_t len = draw_length(rng, 3, spec.max_text_len);
    for (std::size_t i = 0; i < len; ++i) {
      d.words.push_back(bernoulli(rng, 0.3) ? markers[uniform_index(rng, k)].draw(rng) : fillers.draw(rng));
    }
    DatasetRecord r{TaskKind::Ner, d.text(), cats, {}};
    for (std::size_t c = 0; c < k; ++c) {
      r.gold[cats[c]] = EntitySet{positions_where(d, [&](const std::string& w) { return in_pool(markers[c], w); })};
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> generate_classification(const SyntheticSpec& spec, Rng& rng) {
  static const std::vector<std::string> names = {"sports", "finance", "weather", "health",
                                                 "travel", "science", "politics", "music"};
  const std::size_t k = spec.num_categories;
  const WordPool keywords = pool("kw", k);
  const WordPool fillers = pool("w", spec.vocab_size > k ? spec.vocab_size - k : 1);
  std::vector<CategoryLabel> cats;
  for (std::size_t c = 0; c < k; ++c) cats.push_back(PlainLabel{pick_name(names, c, "label")});

  std::vector<DatasetRecord> out;
  for (std::size_t n = 0; n < spec.num_records; ++n) {
    Draft d;
    const std::size_t len = draw_length(rng, 3, spec.max_text_len);
    for (std::size_t i = 0; i < len; ++i) d.words.push_back(fillers.draw(rng));
    for (std::size_t c = 0; c < k; ++c) {
      if (bernoulli(rng, 0.5)) d.words[uniform_index(rng, d.words.size())] = keywords.words[c];
    }
    DatasetRecord r{TaskKind::Classification, d.text(), cats, {}};
    for (std::size_t c = 0; c < k; ++c) {
      const bool applies = std::find(d.words.begin(), d.words.end(), keywords.words[c]) != d.words.end();
      r.gold[cats[c]] = LabelFlag{applies};
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> generate_relation(const SyntheticSpec& spec, Rng& rng) {
  struct TripleDef {
    std::size_t head, tail;
    const char* relation;
  };
  static const std::vector<std::string> types = {"PER", "ORG", "LOC"};
  static const std::vector<TripleDef> defs = {
      {0, 1, "works for"}, {0, 2, "lives in"}, {1, 2, "based in"},
      {0, 0, "knows"},     {1, 1, "owns"},     {2, 2, "near"},
  };
  const std::size_t k = std::min(spec.num_categories, defs.size());
  const std::size_t per = std::max<std::size_t>(1, spec.vocab_size / (2 * types.size()));
  std::vector<WordPool> markers;
  for (std::size_t t = 0; t < types.size(); ++t) markers.push_back(pool("m" + std::to_string(t) + "x", per));
  const WordPool connectors = pool("rel", k);
  const std::size_t used = types.size() * per + k;
  const WordPool fillers = pool("w", spec.vocab_size > used ? spec.vocab_size - used : 1);

  std::vector<CategoryLabel> cats;
  for (std::size_t c = 0; c < k; ++c) {
    cats.push_back(RelationTriple{types[defs[c].head], defs[c].relation, types[defs[c].tail]});
  }

  std::vector<DatasetRecord> out;
  for (std::size_t n = 0; n < spec.num_records; ++n) {
    Draft d;
    const std::size_t len = draw_length(rng, 5, spec.max_text_len);
    for (std::size_t i = 0; i < len; ++i) {
      if (bernoulli(rng, 0.15)) {
        d.words.push_back(markers[uniform_index(rng, types.size())].draw(rng));
      } else if (bernoulli(rng, 0.05)) {
        d.words.push_back(connectors.draw(rng));
      } else {
        d.words.push_back(fillers.draw(rng));
      }
    }
    const std::size_t plants = 1 + uniform_index(rng, 2);
    for (std::size_t p = 0; p < plants && d.words.size() >= 3; ++p) {
      const std::size_t c = uniform_index(rng, k);
      const std::size_t at = uniform_index(rng, d.words.size() - 2);
      d.words[at] = markers[defs[c].head].draw(rng);
      d.words[at + 1] = connectors.words[c];
      d.words[at + 2] = markers[defs[c].tail].draw(rng);
    }
    DatasetRecord r{TaskKind::RelationExtraction, d.text(), cats, {}};
    for (std::size_t c = 0; c < k; ++c) {
      RelationSet rels;
      for (std::size_t i = 0; i + 2 < d.words.size(); ++i) {
        if (in_pool(markers[defs[c].head], d.words[i]) && d.words[i + 1] == connectors.words[c] &&
            in_pool(markers[defs[c].tail], d.words[i + 2])) {
          rels.relations.insert(Relation{{i, i}, {i + 2, i + 2}});
        }
      }
      r.gold[cats[c]] = std::move(rels);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> generate_event(const SyntheticSpec& spec, Rng& rng) {
  struct EventDef {
    const char* type;
    std::array<const char*, 2> roles;
  };
  static const std::vector<EventDef> defs = {
      {"attack", {"attacker", "victim"}}, {"transport", {"vehicle", "destination"}},
      {"meet", {"place", "time"}},        {"hire", {"employer", "employee"}},
  };
  const std::size_t k = std::min(spec.num_categories, defs.size());
  std::vector<WordPool> triggers, role_words;
  for (std::size_t e = 0; e < k; ++e) {
    triggers.push_back(pool("ev" + std::to_string(e) + "t", 2));
    role_words.push_back(pool("ev" + std::to_string(e) + "r", 2));
  }
  const std::size_t used = k * 4;
  const std::size_t rest = spec.vocab_size > used ? spec.vocab_size - used : 2;
  const WordPool args = pool("a", std::max<std::size_t>(1, rest / 3));
  const WordPool fillers = pool("w", std::max<std::size_t>(1, rest - rest / 3));

  std::vector<CategoryLabel> cats;
  for (std::size_t e = 0; e < k; ++e) cats.push_back(PlainLabel{defs[e].type});
  for (std::size_t e = 0; e < k; ++e) {
    for (const char* role : defs[e].roles) cats.push_back(EventRole{defs[e].type, role});
  }

  std::vector<DatasetRecord> out;
  for (std::size_t n = 0; n < spec.num_records; ++n) {
    Draft d;
    const std::size_t len = draw_length(rng, 6, spec.max_text_len);
    for (std::size_t i = 0; i < len; ++i) {
      d.words.push_back(bernoulli(rng, 0.2) ? args.draw(rng) : fillers.draw(rng));
    }
    // At most one event type per text keeps one trigger per type.
    const std::size_t e = uniform_index(rng, k);
    const bool fire = bernoulli(rng, 0.7);
    if (fire) d.words[uniform_index(rng, d.words.size())] = triggers[e].draw(rng);
    for (std::size_t r = 0; r < 2; ++r) {
      if (!bernoulli(rng, 0.6)) continue;
      const std::size_t at = uniform_index(rng, d.words.size() - 1);
      if (in_pool(triggers[e], d.words[at]) || in_pool(triggers[e], d.words[at + 1])) continue;
      d.words[at] = role_words[e].words[r];
      d.words[at + 1] = args.draw(rng);
    }
    DatasetRecord rec{TaskKind::EventTrigger, d.text(), cats, {}};
    for (std::size_t t = 0; t < k; ++t) {
      std::size_t trig = d.words.size();
      for (std::size_t i = 0; i < d.words.size(); ++i) {
        if (in_pool(triggers[t], d.words[i])) {
          trig = i;
          break;
        }
      }
      if (trig == d.words.size()) continue;
      EventStructure ev;
      ev.trigger = {trig, trig};
      for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t i = 0; i + 1 < d.words.size(); ++i) {
          if (d.words[i] == role_words[t].words[r] && in_pool(args, d.words[i + 1])) {
            ev.args.insert(EventArgument{defs[t].roles[r], {i + 1, i + 1}});
          }
        }
      }
      rec.gold[PlainLabel{defs[t].type}] = std::move(ev);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<DatasetRecord> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  switch (spec.task) {
    case TaskKind::Classification: return generate_classification(spec, rng);
    case TaskKind::Ner: return generate_ner(spec, rng);
    case TaskKind::RelationExtraction: return generate_relation(spec, rng);
    case TaskKind::EventTrigger: return generate_event(spec, rng);
    case TaskKind::EventArgument: break;
  }
  throw ValidationError("unsupported synthetic task");
}

std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split_dataset(
    const std::vector<DatasetRecord>& records, double held_out_fraction, std::uint64_t seed) {
  if (held_out_fraction < 0.0 || held_out_fraction > 1.0) {
    throw ValidationError("held-out fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  const auto held = static_cast<std::size_t>(held_out_fraction * static_cast<double>(records.size()) + 0.5);
  std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i + held < order.size() ? out.first : out.second).push_back(records[order[i]]);
  }
  return out;
}

}  // namespace ubert

#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "support/fuzz.hpp"
#include "support/oracle.hpp"
#include "ubert/errors.hpp"
#include "ubert/table_codec.hpp"

using namespace ubert;

namespace {

std::set<std::pair<std::size_t, std::size_t>> ones(const StructureTable& t) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t r = 0; r < t.size(); ++r)
    for (std::size_t c = 0; c < t.size(); ++c)
      if (t.at(r, c) != 0.0) out.insert({r, c});
  return out;
}

double total(const StructureTable& t) { return std::accumulate(t.cells().begin(), t.cells().end(), 0.0); }

using Cells = std::set<std::pair<std::size_t, std::size_t>>;

const SchemaInstance& ner_instance() {
  // [CLS] [task] ner [category] person [text] at offset 6.
  static const SchemaInstance inst = build_instance(TaskKind::Ner, EntityType{"person"}, "john smith works at acme");
  return inst;
}

TokenSpan text_span(std::size_t unit_first, std::size_t unit_last) {
  return TokenSpan{unit_first - ner_instance().text_token_offset, unit_last - ner_instance().text_token_offset};
}

}  // namespace

TEST_SUITE("table_codec") {

TEST_CASE("classification") {
  const SchemaInstance inst = build_instance(TaskKind::Classification, PlainLabel{"sports"}, "a b c d e f");
  REQUIRE(inst.length() == 12);
  const StructureTable yes = encode_classification(true, inst);
  CHECK(ones(yes) == Cells{{0, 0}});
  CHECK(yes.size() == inst.length());
  CHECK(total(encode_classification(false, inst)) == 0.0);
  CHECK(decode_classification(targets_to_logits(yes), 0.5));
  CHECK_FALSE(decode_classification(targets_to_logits(encode_classification(false, inst)), 0.5));

  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + uniform_index(rng, 20);
    const SchemaInstance x = build_instance(TaskKind::Classification, PlainLabel{"l"}, fuzz::words(n));
    const double s = total(encode_classification(bernoulli(rng, 0.5), x));
    CHECK((s == 0.0 || s == 1.0));
  }
}

TEST_CASE("ner encoding") {
  const SchemaInstance& inst = ner_instance();
  REQUIRE(inst.text_token_offset == 6);
  CHECK(ones(encode_ner(EntitySet{{text_span(6, 7)}}, inst)) == Cells{{6, 7}});
  CHECK(total(encode_ner(EntitySet{}, inst)) == 0.0);
  const StructureTable nested = encode_ner(EntitySet{{text_span(6, 9), text_span(7, 8)}}, inst);
  CHECK(ones(nested) == Cells{{6, 9}, {7, 8}});
  CHECK_THROWS_AS(encode_ner(EntitySet{{TokenSpan{3, 5}}}, inst), ValidationError);
  CHECK_THROWS_AS(encode_ner(EntitySet{{TokenSpan{2, 1}}}, inst), ValidationError);

  const EntitySet gold{{text_span(6, 7), text_span(8, 8)}};
  CHECK(decode_ner(targets_to_logits(encode_ner(gold, inst)), inst, 0.5) == gold);
}

TEST_CASE("relation encoding") {
  const SchemaInstance inst =
      build_instance(TaskKind::RelationExtraction, RelationTriple{"PER", "works for", "ORG"}, fuzz::words(8));
  const std::size_t off = inst.text_token_offset;
  auto unit = [&](std::size_t a, std::size_t b) { return TokenSpan{a - off, b - off}; };
  // Same geometry as head (2,3), tail (6,7), measured from the text block.
  const std::size_t base = off;
  const Relation r{unit(base + 2, base + 3), unit(base + 6, base + 7)};
  const RelationTables t = encode_relation(RelationSet{{r}}, inst);
  CHECK(ones(t.head) == Cells{{base + 2, base + 3}});
  CHECK(ones(t.tail) == Cells{{base + 6, base + 7}});
  CHECK(ones(t.coupling) == Cells{{base + 2, base + 6}, {base + 3, base + 7}});
  CHECK(t.head.role() == TableRole::HeadEntity);
  CHECK(t.tail.role() == TableRole::TailEntity);
  CHECK(t.coupling.role() == TableRole::Coupling);
  CHECK(decode_relation(targets_to_logits(t.head), targets_to_logits(t.tail), targets_to_logits(t.coupling), inst,
                        0.5) == RelationSet{{r}});

  const RelationTables empty = encode_relation(RelationSet{}, inst);
  CHECK(total(empty.head) + total(empty.tail) + total(empty.coupling) == 0.0);

  const RelationSet shared{{Relation{{0, 1}, {4, 4}}, Relation{{0, 1}, {6, 7}}}};
  const RelationTables s = encode_relation(shared, inst);
  CHECK(ones(s.head).size() == 1);
  CHECK(ones(s.coupling).size() == 4);

  // All-zero coupling: nothing, whatever the entity tables say.
  CHECK(decode_relation(targets_to_logits(s.head), targets_to_logits(s.tail),
                        StructureTable(inst.length(), TableRole::Coupling, -10.0), inst, 0.5)
            .relations.empty());
}

TEST_CASE("relation pairing uses both coupling cells") {
  const SchemaInstance inst =
      build_instance(TaskKind::RelationExtraction, RelationTriple{"A", "r", "B"}, fuzz::words(10));
  const std::size_t o = inst.text_token_offset;
  StructureTable head(inst.length(), TableRole::HeadEntity, -10), tail(inst.length(), TableRole::TailEntity, -10),
      coupling(inst.length(), TableRole::Coupling, -10);
  head.at(o + 0, o + 1) = 10;
  head.at(o + 3, o + 3) = 10;
  tail.at(o + 5, o + 6) = 10;
  tail.at(o + 8, o + 9) = 10;
  coupling.at(o + 3, o + 8) = 10;
  coupling.at(o + 3, o + 9) = 10;
  coupling.at(o + 0, o + 5) = 10;  // start half only for (0,1)->(5,6)
  const RelationSet got = decode_relation(head, tail, coupling, inst, 0.5);
  CHECK(got == RelationSet{{Relation{{3, 3}, {8, 9}}}});
  CHECK(got == oracle::decode_relation(head, tail, coupling, inst, 0.5));
}

TEST_CASE("event encoding") {
  const SchemaInstance trig = build_instance(TaskKind::EventTrigger, PlainLabel{"attack"}, fuzz::words(10));
  const std::size_t to = trig.text_token_offset;
  const std::string ttext = span_text(trig, TokenSpan{7, 7});
  CHECK(ttext == "t7");

  const EventStructure ev{TokenSpan{7, 7}, {EventArgument{"time", TokenSpan{2, 3}}}};
  const SchemaInstance arg =
      build_instance(TaskKind::EventArgument, EventRoleWithTrigger{"attack", ttext, "time"}, fuzz::words(10));
  const EventTables t = encode_event(ev, trig, {arg});
  CHECK(ones(t.trigger) == Cells{{to + 7, to + 7}});
  CHECK(t.trigger.role() == TableRole::Trigger);
  REQUIRE(t.arguments.size() == 1);
  const std::size_t ao = arg.text_token_offset;
  CHECK(ones(t.arguments[0]) == Cells{{ao + 2, ao + 3}});
  CHECK(t.arguments[0].role() == TableRole::Argument);

  const EventTables bare = encode_event(EventStructure{TokenSpan{7, 7}, {}}, trig, {});
  CHECK(ones(bare.trigger).size() == 1);
  CHECK(bare.arguments.empty());

  const EventStructure twice{TokenSpan{7, 7},
                             {EventArgument{"time", TokenSpan{2, 3}}, EventArgument{"time", TokenSpan{5, 5}}}};
  const EventTables two = encode_event(twice, trig, {arg});
  CHECK(ones(two.arguments[0]).size() == 2);

  const EventStructure extra{TokenSpan{7, 7},
                             {EventArgument{"time", TokenSpan{2, 3}}, EventArgument{"place", TokenSpan{0, 0}}}};
  try {
    encode_event(extra, trig, {arg});
    FAIL("expected a coverage error");
  } catch (const CoverageError& e) {
    CHECK(std::string(e.what()).find("place") != std::string::npos);
  }

  const SchemaInstance wrong =
      build_instance(TaskKind::EventArgument, EventRoleWithTrigger{"attack", "t6", "time"}, fuzz::words(10));
  CHECK_THROWS_AS(encode_event(ev, trig, {wrong}), ValidationError);

  std::vector<StructureTable> logits;
  for (const StructureTable& a : t.arguments) logits.push_back(targets_to_logits(a));
  CHECK(decode_event_arguments(TokenSpan{7, 7}, logits, {arg}, 0.5) == ev);
}

TEST_CASE("decode_table basics") {
  const SchemaInstance& inst = ner_instance();
  const std::size_t l = inst.length();
  CHECK(decode_table(StructureTable(l, TableRole::Single, -10), 0.5, 6).empty());
  StructureTable one(l, TableRole::Single, -10);
  one.at(6, 7) = 10;
  const auto d = decode_table(one, 0.5, 6);
  REQUIRE(d.size() == 1);
  CHECK(d[0] == LocatingDesignator{6, 7, TableRole::Single});
  // Exactly at the threshold is not active.
  StructureTable edge(l, TableRole::Single, 0.0);
  CHECK(decode_table(edge, 0.5, 6).empty());
}

TEST_CASE("masking") {
  Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    const std::size_t l = 2 + uniform_index(rng, 15);
    const std::size_t off = uniform_index(rng, l);
    for (TableRole role : {TableRole::Single, TableRole::HeadEntity, TableRole::Coupling, TableRole::Argument}) {
      const StructureTable t = fuzz::score_table(rng, l, role, 0.6);
      for (const LocatingDesignator& d : decode_table(t, 0.5, off)) {
        CHECK(d.row >= off);
        CHECK(d.col >= off);
        if (is_span_role(role)) CHECK(d.row <= d.col);
        CHECK(d.table_role == role);
      }
    }
  }
}

TEST_CASE("designator counts") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    const SchemaInstance inst = build_instance(TaskKind::RelationExtraction, RelationTriple{"A", "r", "B"}, fuzz::words(n));
    const EntitySet es = fuzz::entity_set(rng, n);
    CHECK(ones(encode_ner(es, inst)).size() == es.spans.size());

    const RelationSet rs = fuzz::relation_set(rng, n);
    Cells expected;
    const std::size_t o = inst.text_token_offset;
    for (const Relation& r : rs.relations) {
      expected.insert({r.head.first + o, r.tail.first + o});
      expected.insert({r.head.last + o, r.tail.last + o});
    }
    CHECK(ones(encode_relation(rs, inst).coupling) == expected);
  }
}

TEST_CASE("round trips over random gold") {
  Rng rng(17);
  std::size_t ambiguous = 0, relation_cases = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + uniform_index(rng, 30);
    const SchemaInstance ner = build_instance(TaskKind::Ner, EntityType{"type"}, fuzz::words(n));
    const EntitySet es = fuzz::entity_set(rng, n);
    REQUIRE(decode_ner(targets_to_logits(encode_ner(es, ner)), ner, 0.5) == es);

    const SchemaInstance rel = build_instance(TaskKind::RelationExtraction, RelationTriple{"A", "r", "B"}, fuzz::words(n));
    const RelationSet rs = fuzz::relation_set(rng, n);
    const RelationTables t = encode_relation(rs, rel);
    const StructureTable h = targets_to_logits(t.head), tl = targets_to_logits(t.tail), c = targets_to_logits(t.coupling);
    const bool amb = oracle::decode_relation(h, tl, c, rel, 0.5) != rs;
    CHECK(is_coupling_ambiguous(rs, rel) == amb);
    ++relation_cases;
    if (amb) {
      ++ambiguous;
      continue;
    }
    REQUIRE(decode_relation(h, tl, c, rel, 0.5) == rs);
  }
  MESSAGE("coupling-ambiguous share: " << ambiguous << "/" << relation_cases);
  CHECK(ambiguous < relation_cases);
}

TEST_CASE("production decoders agree with the oracle") {
  Rng rng(23);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t n = 1 + uniform_index(rng, 5);
    const SchemaInstance inst = build_instance(TaskKind::RelationExtraction, RelationTriple{"A", "r", "B"}, fuzz::words(n));
    const std::size_t l = inst.length();
    const double density = uniform01(rng);
    const StructureTable s = fuzz::score_table(rng, l, TableRole::Single, density);
    CHECK(decode_table(s, 0.5, inst.text_token_offset) == oracle::scan_table(s, 0.5, inst.text_token_offset));
    CHECK(decode_ner(s, inst, 0.5) == oracle::decode_spans(s, inst, 0.5));
    CHECK(decode_classification(s, 0.5) == oracle::decode_classification(s, 0.5));
    const StructureTable h = fuzz::score_table(rng, l, TableRole::HeadEntity, density);
    const StructureTable t = fuzz::score_table(rng, l, TableRole::TailEntity, density);
    const StructureTable c = fuzz::score_table(rng, l, TableRole::Coupling, density);
    CHECK(decode_relation(h, t, c, inst, 0.5) == oracle::decode_relation(h, t, c, inst, 0.5));
  }
}

}

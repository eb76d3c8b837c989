#include <doctest.h>

#include <cmath>

#include "ubert/data_io.hpp"
#include "ubert/errors.hpp"
#include "ubert/random.hpp"
#include "ubert/training.hpp"

using namespace ubert;

namespace {

DatasetRecord ner_record() {
  DatasetRecord r;
  r.task = TaskKind::Ner;
  r.text = "john smith joined acme corp in paris";
  r.categories = {EntityType{"person"}, EntityType{"organization"}, EntityType{"location"}};
  r.gold[EntityType{"person"}] = EntitySet{{TokenSpan{0, 1}}};
  r.gold[EntityType{"organization"}] = EntitySet{{TokenSpan{3, 4}}};
  r.gold[EntityType{"location"}] = EntitySet{{TokenSpan{6, 6}}};
  return r;
}

ModelConfig config_for(const Vocabulary& vocab) {
  ModelConfig c;
  c.vocab_size = vocab.size();
  c.max_len = 64;
  return c;
}

std::vector<Tensor> snapshot(const UbertModel& m) {
  std::vector<Tensor> out;
  for (const Parameter* p : m.parameters()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("units carry one item per category") {
  const DatasetRecord r = ner_record();
  const Vocabulary vocab = build_vocabulary({r});
  const TrainingUnit unit = build_unit(r, vocab);
  REQUIRE(unit.items.size() == 3);
  for (const UnitItem& item : unit.items) {
    CHECK(item.ids.size() == item.instance.length());
    REQUIRE(item.targets.size() == 1);
    CHECK(item.targets[0].size() == item.instance.length());
  }
}

TEST_CASE("event units include teacher-forced argument instances") {
  const auto records = generate_synthetic({TaskKind::EventTrigger, 60, 20, 12, 2, 3});
  const Vocabulary vocab = build_vocabulary(records);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const TrainingUnit unit = build_unit(records[i], vocab, i);
    std::size_t triggers = 0, arguments = 0;
    for (const UnitItem& item : unit.items) {
      if (item.instance.task == TaskKind::EventTrigger) ++triggers;
      if (item.instance.task == TaskKind::EventArgument) ++arguments;
    }
    CHECK(triggers == primary_categories(records[i]).size());
    std::size_t expected = 0;
    for (const auto& [cat, ann] : records[i].gold)
      expected += event_roles(records[i], std::get<PlainLabel>(cat).name).size();
    CHECK(arguments == expected);
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TrainConfig{};
  c.learning_rate = 0;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  const DatasetRecord r = ner_record();
  const Vocabulary vocab = build_vocabulary({r});
  for (OptimizerKind opt : {OptimizerKind::Adam, OptimizerKind::Sgd}) {
    UbertModel model(config_for(vocab));
    const auto before = snapshot(model);
    TrainConfig tc;
    tc.learning_rate = 0;
    tc.epochs = 1;
    tc.optimizer = opt;
    train(model, build_units({r}, vocab), tc);
    CHECK(snapshot(model) == before);
  }
}

TEST_CASE("single unit memorization") {
  const DatasetRecord r = ner_record();
  const Vocabulary vocab = build_vocabulary({r});
  UbertModel model(config_for(vocab));
  TrainConfig tc;
  tc.epochs = 200;
  const TrainResult result = train(model, build_units({r}, vocab), tc);
  REQUIRE(result.loss_history.size() == 200);
  CHECK(result.loss_history.back() < 0.01);
  CHECK(result.loss_history.back() < result.loss_history.front());
  const EvalReport report = evaluate(model, vocab, {r}, 0.5);
  REQUIRE(report.ner);
  CHECK(report.ner->f1 == 1.0);
}

TEST_CASE("training is deterministic") {
  const auto records = generate_synthetic({TaskKind::Ner, 40, 30, 8, 2, 1});
  const Vocabulary vocab = build_vocabulary(records);
  auto run = [&] {
    UbertModel model(config_for(vocab));
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_unit_size = 4;
    std::vector<double> seen;
    const TrainResult r = train(model, build_units(records, vocab), tc, [&](std::size_t, double l) { seen.push_back(l); });
    CHECK(seen == r.loss_history);
    return std::make_pair(r.loss_history, snapshot(model));
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const DatasetRecord r = ner_record();
  const Vocabulary vocab = build_vocabulary({r});
  UbertModel model(config_for(vocab));
  model.parameter("biaffine.span").value[0] = std::nan("");
  TrainConfig tc;
  tc.epochs = 1;
  try {
    train(model, build_units({r}, vocab), tc);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("unit") != std::string::npos);
    CHECK(msg.find("norm") != std::string::npos);
  }
}

TEST_CASE("span_f1") {
  const std::set<int> gold{1, 2};
  Prf p = span_f1(gold, gold);
  CHECK(p.precision == 1.0);
  CHECK(p.recall == 1.0);
  CHECK(p.f1 == 1.0);
  p = span_f1(std::set<int>{}, gold);
  CHECK(p.precision == 0.0);
  CHECK(p.recall == 0.0);
  CHECK(p.f1 == 0.0);
  p = span_f1(std::set<int>{1, 2}, std::set<int>{2, 3});
  CHECK(p.precision == 0.5);
  CHECK(p.recall == 0.5);
  CHECK(p.f1 == 0.5);

  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    std::set<int> a, b;
    for (int k = 0; k < 8; ++k) {
      if (bernoulli(rng, 0.4)) a.insert(k);
      if (bernoulli(rng, 0.4)) b.insert(k);
    }
    const Prf ab = span_f1(a, b), ba = span_f1(b, a);
    for (double v : {ab.precision, ab.recall, ab.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);
    CHECK(ab.f1 == ba.f1);
  }
}

TEST_CASE("gold scorer reaches the ceiling") {
  for (TaskKind task : {TaskKind::Classification, TaskKind::Ner, TaskKind::RelationExtraction, TaskKind::EventTrigger}) {
    const auto records = generate_synthetic({task, 60, 80, 12, 3, 11});
    const EvalReport report = evaluate(GoldScorer{}, records, 0.5);
    INFO(task_id(task));
    CHECK(report.records == records.size());
    if (report.classification_accuracy) CHECK(*report.classification_accuracy == 1.0);
    if (report.ner) CHECK(report.ner->f1 == 1.0);
    if (report.relation) CHECK(report.relation->f1 == 1.0);
    if (report.event_trigger) CHECK(report.event_trigger->f1 == 1.0);
    if (report.event_argument) CHECK(report.event_argument->f1 == 1.0);
    CHECK(report.relation_ambiguity_rate == 0.0);
  }
}

TEST_CASE("untrained model evaluates inside the legal mask") {
  const auto records = generate_synthetic({TaskKind::RelationExtraction, 60, 20, 10, 2, 4});
  const Vocabulary vocab = build_vocabulary(records);
  UbertModel model(config_for(vocab));
  const EvalReport report = evaluate(model, vocab, records, 0.5);
  REQUIRE(report.relation);
  CHECK(report.relation->f1 >= 0.0);
  CHECK(report.relation->f1 <= 1.0);
  const ModelScorer scorer(model, vocab);
  for (const DatasetRecord& r : records) {
    const RecordPrediction pred = predict(scorer, r, 0.5);
    const std::size_t n = tokenize(r.text).size();
    for (const auto& [cat, ann] : pred.annotations) CHECK_NOTHROW(validate_annotation(ann, n));
  }
}

TEST_CASE("report serialization") {
  EvalReport r;
  r.records = 3;
  r.ner = Prf::from_counts(2, 1, 1);
  r.loss_curve = {1.5, 0.5};
  const std::string json = r.to_json();
  CHECK(json.find("\"ner\"") != std::string::npos);
  CHECK(r.to_text().find("ner") != std::string::npos);
  CHECK(r == r);
  CHECK(Prf::from_counts(0, 0, 0).f1 == 0.0);
}

}

#include "ubert/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ubert/errors.hpp"
#include "ubert/random.hpp"

namespace ubert {

// ---------------------------------------------------------------------------
// Units

std::size_t TrainingUnit::max_length() const {
  std::size_t l = 0;
  for (const UnitItem& it : items) l = std::max(l, it.instance.length());
  return l;
}

std::vector<SchemaInstance> argument_instances(const DatasetRecord& record,
                                               const std::string& event_type, TokenSpan trigger) {
  const TokenSequence text = tokenize(record.text);
  const auto [b, e] = char_span_of_token_span(text, trigger);
  const std::string trigger_text = record.text.substr(b, e - b);
  std::vector<SchemaInstance> out;
  for (const std::string& role : event_roles(record, event_type)) {
    out.push_back(build_instance(TaskKind::EventArgument,
                                 EventRoleWithTrigger{event_type, trigger_text, role}, record.text));
  }
  return out;
}

namespace {

UnitItem make_item(SchemaInstance inst, const Vocabulary& vocab, std::vector<StructureTable> targets) {
  UnitItem item;
  item.ids = vocab.ids(inst.tokens);
  item.instance = std::move(inst);
  item.targets = std::move(targets);
  return item;
}

const Annotation* gold_for(const DatasetRecord& record, const CategoryLabel& c) {
  auto it = record.gold.find(c);
  return it == record.gold.end() ? nullptr : &it->second;
}

}  // namespace

TrainingUnit build_unit(const DatasetRecord& record, const Vocabulary& vocab, std::size_t record_index) {
  TrainingUnit unit;
  unit.record_index = record_index;
  const SchemaBatch batch = build_batch(record.task, primary_categories(record), record.text);
  for (const SchemaInstance& inst : batch.instances) {
    const Annotation* gold = gold_for(record, inst.category);
    switch (record.task) {
      case TaskKind::Classification: {
        const bool applies = gold && std::get<LabelFlag>(*gold).applies;
        unit.items.push_back(make_item(inst, vocab, {encode_classification(applies, inst)}));
        break;
      }
      case TaskKind::Ner: {
        const EntitySet spans = gold ? std::get<EntitySet>(*gold) : EntitySet{};
        unit.items.push_back(make_item(inst, vocab, {encode_ner(spans, inst)}));
        break;
      }
      case TaskKind::RelationExtraction: {
        RelationTables t = encode_relation(gold ? std::get<RelationSet>(*gold) : RelationSet{}, inst);
        unit.items.push_back(make_item(inst, vocab, {std::move(t.head), std::move(t.tail), std::move(t.coupling)}));
        break;
      }
      case TaskKind::EventTrigger: {
        if (!gold) {
          unit.items.push_back(make_item(inst, vocab, {StructureTable(inst.length(), TableRole::Trigger)}));
          break;
        }
        const auto& ev = std::get<EventStructure>(*gold);
        const std::string& type = std::get<PlainLabel>(inst.category).name;
        std::vector<SchemaInstance> args = argument_instances(record, type, ev.trigger);
        EventTables t = encode_event(ev, inst, args);
        unit.items.push_back(make_item(inst, vocab, {std::move(t.trigger)}));
        for (std::size_t k = 0; k < args.size(); ++k) {
          unit.items.push_back(make_item(std::move(args[k]), vocab, {std::move(t.arguments[k])}));
        }
        break;
      }
      case TaskKind::EventArgument:
        throw ValidationError("event_argument records are not trainable units");
    }
  }
  return unit;
}

std::vector<TrainingUnit> build_units(const std::vector<DatasetRecord>& records, const Vocabulary& vocab) {
  std::vector<TrainingUnit> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(build_unit(records[i], vocab, i));
  return out;
}

std::size_t longest_unit(const std::vector<DatasetRecord>& records) {
  std::size_t l = 0;
  for (const DatasetRecord& r : records) {
    for (const CategoryLabel& c : primary_categories(r)) {
      l = std::max(l, build_instance(r.task, c, r.text).length());
    }
    if (r.task == TaskKind::EventTrigger) {
      // Second stage with the whole text as trigger bounds every prediction.
      for (const CategoryLabel& c : r.categories) {
        if (const auto* role = std::get_if<EventRole>(&c)) {
          l = std::max(l, build_instance(TaskKind::EventArgument,
                                         EventRoleWithTrigger{role->event_type, r.text, role->role},
                                         r.text)
                              .length());
        }
      }
    }
  }
  return l;
}

// ---------------------------------------------------------------------------
// Optimization

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be a finite non-negative number");
  }
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (batch_unit_size < 1) throw ValidationError("batch_unit_size must be at least 1");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) throw ValidationError("grad_clip_norm must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
}

namespace {

double forward_unit(UbertModel& model, Tape& tape, const TrainingUnit& unit, double pos_weight,
                    Var* loss_out) {
  std::vector<Var> scores;
  std::vector<StructureTable> targets;
  for (const UnitItem& item : unit.items) {
    const SpanProjections proj = model.span_projections(tape, model.encode(tape, item.ids));
    for (const StructureTable& t : item.targets) {
      scores.push_back(model.score(tape, proj, t.role()));
      targets.push_back(t);
    }
  }
  const Var loss = bce_loss(tape, scores, targets, pos_weight);
  *loss_out = loss;
  return tape.value(loss)[0];
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& c, std::size_t n) : cfg_(c), m_(n), v_(n) {}

  void step(const std::vector<Parameter*>& params) {
    ++t_;
    const double lr = cfg_.learning_rate;
    if (cfg_.optimizer == OptimizerKind::Sgd) {
      for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->grad[i];
      }
      return;
    }
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter& p = *params[k];
      if (m_[k].empty()) {
        m_[k].assign(p.value.size(), 0.0);
        v_[k].assign(p.value.size(), 0.0);
      }
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m_[k][i] = b1 * m_[k][i] + (1.0 - b1) * g;
        v_[k][i] = b2 * v_[k][i] + (1.0 - b2) * g * g;
        p.value[i] -= lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + cfg_.epsilon);
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

double grad_norm(const std::vector<Parameter*>& params) {
  double s = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.values()) s += g * g;
  }
  return std::sqrt(s);
}

std::string parameter_norms(const std::vector<Parameter*>& params) {
  std::ostringstream os;
  os << std::setprecision(6);
  for (const Parameter* p : params) {
    double s = 0.0;
    for (double v : p->value.values()) s += v * v;
    os << "\n  " << p->name << ": " << std::sqrt(s);
  }
  return os.str();
}

}  // namespace

double unit_loss_and_backward(UbertModel& model, const TrainingUnit& unit, double pos_weight) {
  Tape tape;
  Var loss;
  const double value = forward_unit(model, tape, unit, pos_weight, &loss);
  tape.backward(loss);
  return value;
}

double unit_loss(const UbertModel& model, const TrainingUnit& unit, double pos_weight) {
  Tape tape;
  Var loss;
  return forward_unit(const_cast<UbertModel&>(model), tape, unit, pos_weight, &loss);
}

TrainResult train(UbertModel& model, const std::vector<TrainingUnit>& units, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (units.empty()) throw ValidationError("training set is empty");
  for (const TrainingUnit& u : units) {
    if (u.max_length() > model.config().max_len) {
      throw ValidationError("unit for record " + std::to_string(u.record_index) +
                            " is longer than max_len " + std::to_string(model.config().max_len));
    }
  }
  const std::vector<Parameter*> params = model.parameters();
  Optimizer opt(config, params.size());
  Rng rng(config.seed);
  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  model.zero_grad();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    std::size_t pending = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const TrainingUnit& unit = units[order[pos]];
      const double loss = unit_loss_and_backward(model, unit, config.pos_weight);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", unit " +
                           std::to_string(unit.record_index) + "; parameter norms:" +
                           parameter_norms(params));
      }
      total += loss;
      if (++pending == config.batch_unit_size || pos + 1 == order.size()) {
        if (config.grad_clip_norm) {
          const double norm = grad_norm(params);
          if (norm > *config.grad_clip_norm) {
            const double f = *config.grad_clip_norm / norm;
            for (Parameter* p : params) {
              for (double& g : p->grad.values()) g *= f;
            }
          }
        }
        opt.step(params);
        model.zero_grad();
        pending = 0;
      }
    }
    result.loss_history.push_back(total / static_cast<double>(units.size()));
    if (on_epoch) on_epoch(epoch, result.loss_history.back());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Scoring and prediction

std::vector<StructureTable> ModelScorer::score(const DatasetRecord&, const SchemaInstance& instance,
                                               std::span<const TableRole> roles) const {
  const std::vector<std::size_t> ids = vocab_.ids(instance.tokens);
  if (ids.size() > model_.config().max_len) {
    // Too long to score: behave as if nothing fired.
    std::vector<StructureTable> out;
    for (TableRole r : roles) out.emplace_back(ids.size(), r, -1e9);
    return out;
  }
  return model_.score_tables(ids, roles);
}

std::vector<StructureTable> GoldScorer::score(const DatasetRecord& record, const SchemaInstance& instance,
                                              std::span<const TableRole> roles) const {
  std::vector<StructureTable> targets;
  const Annotation* gold = gold_for(record, instance.category);
  switch (instance.task) {
    case TaskKind::Classification:
      targets.push_back(encode_classification(gold && std::get<LabelFlag>(*gold).applies, instance));
      break;
    case TaskKind::Ner:
      targets.push_back(encode_ner(gold ? std::get<EntitySet>(*gold) : EntitySet{}, instance));
      break;
    case TaskKind::RelationExtraction: {
      RelationTables t = encode_relation(gold ? std::get<RelationSet>(*gold) : RelationSet{}, instance);
      targets = {std::move(t.head), std::move(t.tail), std::move(t.coupling)};
      break;
    }
    case TaskKind::EventTrigger: {
      EntitySet trig;
      if (gold) trig.spans.insert(std::get<EventStructure>(*gold).trigger);
      targets.push_back(encode_ner(trig, instance, TableRole::Trigger));
      break;
    }
    case TaskKind::EventArgument: {
      const auto& cat = std::get<EventRoleWithTrigger>(instance.category);
      EntitySet spans;
      const Annotation* ev_gold = gold_for(record, PlainLabel{cat.event_type});
      if (ev_gold) {
        const auto& ev = std::get<EventStructure>(*ev_gold);
        if (span_text(instance, ev.trigger) == cat.trigger_text) {
          for (const EventArgument& a : ev.args) {
            if (a.role == cat.role) spans.spans.insert(a.span);
          }
        }
      }
      targets.push_back(encode_ner(spans, instance, TableRole::Argument));
      break;
    }
  }
  std::vector<StructureTable> out;
  for (TableRole r : roles) {
    auto it = std::find_if(targets.begin(), targets.end(), [r](const StructureTable& t) { return t.role() == r; });
    out.push_back(it == targets.end() ? StructureTable(instance.length(), r, -magnitude_)
                                      : targets_to_logits(*it, magnitude_));
  }
  return out;
}

RecordPrediction predict(const TableScorer& scorer, const DatasetRecord& record, double threshold) {
  RecordPrediction out;
  const SchemaBatch batch = build_batch(record.task, primary_categories(record), record.text);
  for (const SchemaInstance& inst : batch.instances) {
    switch (record.task) {
      case TaskKind::Classification: {
        const TableRole roles[] = {TableRole::Single};
        out.annotations[inst.category] =
            LabelFlag{decode_classification(scorer.score(record, inst, roles)[0], threshold)};
        break;
      }
      case TaskKind::Ner: {
        const TableRole roles[] = {TableRole::Single};
        out.annotations[inst.category] = decode_ner(scorer.score(record, inst, roles)[0], inst, threshold);
        break;
      }
      case TaskKind::RelationExtraction: {
        const TableRole roles[] = {TableRole::HeadEntity, TableRole::TailEntity, TableRole::Coupling};
        const auto t = scorer.score(record, inst, roles);
        out.annotations[inst.category] = decode_relation(t[0], t[1], t[2], inst, threshold);
        break;
      }
      case TaskKind::EventTrigger: {
        const TableRole trig_role[] = {TableRole::Trigger};
        const TableRole arg_role[] = {TableRole::Argument};
        const std::string& type = std::get<PlainLabel>(inst.category).name;
        for (const TokenSpan& trigger : decode_ner(scorer.score(record, inst, trig_role)[0], inst, threshold).spans) {
          const std::vector<SchemaInstance> args = argument_instances(record, type, trigger);
          std::vector<StructureTable> arg_scores;
          for (const SchemaInstance& a : args) arg_scores.push_back(scorer.score(record, a, arg_role)[0]);
          out.events.emplace_back(type, decode_event_arguments(trigger, arg_scores, args, threshold));
        }
        break;
      }
      case TaskKind::EventArgument:
        throw ValidationError("event_argument records cannot be predicted directly");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

Prf Prf::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
  bool seen = false;

  template <typename T>
  void add(const std::set<T>& pred, const std::set<T>& gold) {
    seen = true;
    std::size_t hit = 0;
    for (const T& p : pred) hit += gold.count(p);
    tp += hit;
    fp += pred.size() - hit;
    fn += gold.size() - hit;
  }
  std::optional<Prf> result() const {
    if (!seen) return std::nullopt;
    return Prf::from_counts(tp, fp, fn);
  }
};

}  // namespace

EvalReport evaluate(const TableScorer& scorer, const std::vector<DatasetRecord>& records, double threshold) {
  EvalReport report;
  report.records = records.size();
  Counts ner, rel, trig, arg;
  std::size_t cls_correct = 0, cls_total = 0, rel_sets = 0, rel_ambiguous = 0;

  for (const DatasetRecord& record : records) {
    const RecordPrediction pred = predict(scorer, record, threshold);
    switch (record.task) {
      case TaskKind::Classification:
        for (const auto& [cat, ann] : pred.annotations) {
          const Annotation* g = gold_for(record, cat);
          const bool gold = g && std::get<LabelFlag>(*g).applies;
          cls_correct += std::get<LabelFlag>(ann).applies == gold;
          ++cls_total;
        }
        break;
      case TaskKind::Ner:
        for (const auto& [cat, ann] : pred.annotations) {
          const Annotation* g = gold_for(record, cat);
          ner.add(std::get<EntitySet>(ann).spans, g ? std::get<EntitySet>(*g).spans : std::set<TokenSpan>{});
        }
        break;
      case TaskKind::RelationExtraction:
        for (const auto& [cat, ann] : pred.annotations) {
          const Annotation* g = gold_for(record, cat);
          const RelationSet gold = g ? std::get<RelationSet>(*g) : RelationSet{};
          rel.add(std::get<RelationSet>(ann).relations, gold.relations);
          if (!gold.relations.empty()) {
            ++rel_sets;
            rel_ambiguous += is_coupling_ambiguous(gold, build_instance(record.task, cat, record.text));
          }
        }
        break;
      case TaskKind::EventTrigger: {
        using TriggerKey = std::pair<std::string, TokenSpan>;
        using ArgKey = std::tuple<std::string, TokenSpan, std::string, TokenSpan>;
        std::set<TriggerKey> pt, gt;
        std::set<ArgKey> pa, ga;
        for (const auto& [type, ev] : pred.events) {
          pt.insert(TriggerKey{type, ev.trigger});
          for (const EventArgument& a : ev.args) pa.insert(ArgKey{type, ev.trigger, a.role, a.span});
        }
        for (const auto& [cat, ann] : record.gold) {
          const std::string& type = std::get<PlainLabel>(cat).name;
          const auto& ev = std::get<EventStructure>(ann);
          gt.insert(TriggerKey{type, ev.trigger});
          for (const EventArgument& a : ev.args) ga.insert(ArgKey{type, ev.trigger, a.role, a.span});
        }
        trig.add(pt, gt);
        arg.add(pa, ga);
        break;
      }
      case TaskKind::EventArgument: break;
    }
  }
  if (cls_total) report.classification_accuracy = static_cast<double>(cls_correct) / static_cast<double>(cls_total);
  report.classification_total = cls_total;
  report.ner = ner.result();
  report.relation = rel.result();
  report.event_trigger = trig.result();
  report.event_argument = arg.result();
  report.relation_ambiguity_rate = rel_sets ? static_cast<double>(rel_ambiguous) / static_cast<double>(rel_sets) : 0.0;
  return report;
}

EvalReport evaluate(const UbertModel& model, const Vocabulary& vocab, const std::vector<DatasetRecord>& records,
                    double threshold) {
  return evaluate(ModelScorer(model, vocab), records, threshold);
}

// ---------------------------------------------------------------------------
// Report serialization

namespace {

nlohmann::json prf_json(const Prf& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn}};
}

bool prf_equal(const std::optional<Prf>& a, const std::optional<Prf>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->precision == b->precision && a->recall == b->recall && a->f1 == b->f1 && a->tp == b->tp &&
         a->fp == b->fp && a->fn == b->fn;
}

}  // namespace

bool operator==(const EvalReport& a, const EvalReport& b) {
  return a.records == b.records && a.classification_accuracy == b.classification_accuracy &&
         a.classification_total == b.classification_total && prf_equal(a.ner, b.ner) &&
         prf_equal(a.relation, b.relation) && prf_equal(a.event_trigger, b.event_trigger) &&
         prf_equal(a.event_argument, b.event_argument) &&
         a.relation_ambiguity_rate == b.relation_ambiguity_rate && a.loss_curve == b.loss_curve;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["records"] = records;
  if (classification_accuracy) {
    j["classification"] = {{"accuracy", *classification_accuracy}, {"total", classification_total}};
  }
  if (ner) j["ner"] = prf_json(*ner);
  if (relation) j["relation"] = prf_json(*relation);
  if (event_trigger) j["event_trigger"] = prf_json(*event_trigger);
  if (event_argument) j["event_argument"] = prf_json(*event_argument);
  j["relation_ambiguity_rate"] = relation_ambiguity_rate;
  j["loss_curve"] = loss_curve;
  return j.dump();
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "records " << records << '\n';
  if (classification_accuracy) {
    os << "classification accuracy " << *classification_accuracy << " (" << classification_total << " decisions)\n";
  }
  auto line = [&](const char* name, const std::optional<Prf>& m) {
    if (m) {
      os << name << " p " << m->precision << " r " << m->recall << " f1 " << m->f1 << " (tp " << m->tp
         << " fp " << m->fp << " fn " << m->fn << ")\n";
    }
  };
  line("ner", ner);
  line("relation", relation);
  line("event_trigger", event_trigger);
  line("event_argument", event_argument);
  os << "relation ambiguity rate " << relation_ambiguity_rate << '\n';
  for (std::size_t i = 0; i < loss_curve.size(); ++i) os << "epoch " << i + 1 << " loss " << loss_curve[i] << '\n';
  return os.str();
}

}  // namespace ubert

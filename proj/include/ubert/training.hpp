#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ubert/data_io.hpp"
#include "ubert/model.hpp"

namespace ubert {

// One schema instance with the tables the model must produce for it.
struct UnitItem {
  SchemaInstance instance;
  std::vector<std::size_t> ids;
  std::vector<StructureTable> targets;  // roles fix which biaffine head scores each
};

// All instances of one record; the optimizer sees them as one flattened
// loss. Event records contribute trigger instances plus teacher-forced
// argument instances for every gold trigger.
struct TrainingUnit {
  std::size_t record_index = 0;
  std::vector<UnitItem> items;

  std::size_t max_length() const;
};

TrainingUnit build_unit(const DatasetRecord& record, const Vocabulary& vocab,
                        std::size_t record_index = 0);
std::vector<TrainingUnit> build_units(const std::vector<DatasetRecord>& records,
                                      const Vocabulary& vocab);

// Builds one instance per argument role of `event_type`, conditioned on the
// trigger found at `trigger` (raw-text tokens).
std::vector<SchemaInstance> argument_instances(const DatasetRecord& record,
                                               const std::string& event_type, TokenSpan trigger);

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_unit_size = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  double threshold = 0.5;
  double pos_weight = 1.0;

  void validate() const;
};

// Summed loss of a unit on a fresh tape; gradients accumulate into the
// model's parameters.
double unit_loss_and_backward(UbertModel& model, const TrainingUnit& unit, double pos_weight);
// Loss only.
double unit_loss(const UbertModel& model, const TrainingUnit& unit, double pos_weight);

struct TrainResult {
  std::vector<double> loss_history;  // mean unit loss per epoch
};

// Called after every epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

TrainResult train(UbertModel& model, const std::vector<TrainingUnit>& units,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;

  static Prf from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

// Exact-match micro metric over sets. Empty predictions give precision 0.
template <typename T>
Prf span_f1(const std::set<T>& pred, const std::set<T>& gold) {
  std::size_t tp = 0;
  for (const T& p : pred) tp += gold.count(p);
  return Prf::from_counts(tp, pred.size() - tp, gold.size() - tp);
}

struct EvalReport {
  std::size_t records = 0;
  std::optional<double> classification_accuracy;
  std::size_t classification_total = 0;
  std::optional<Prf> ner;
  std::optional<Prf> relation;
  std::optional<Prf> event_trigger;
  std::optional<Prf> event_argument;
  double relation_ambiguity_rate = 0.0;
  std::vector<double> loss_curve;

  std::string to_json() const;
  std::string to_text() const;
  friend bool operator==(const EvalReport&, const EvalReport&);
};

// Produces score tables for an instance of a record.
class TableScorer {
 public:
  virtual ~TableScorer() = default;
  virtual std::vector<StructureTable> score(const DatasetRecord& record,
                                            const SchemaInstance& instance,
                                            std::span<const TableRole> roles) const = 0;
};

class ModelScorer final : public TableScorer {
 public:
  ModelScorer(const UbertModel& model, const Vocabulary& vocab) : model_(model), vocab_(vocab) {}
  std::vector<StructureTable> score(const DatasetRecord& record, const SchemaInstance& instance,
                                    std::span<const TableRole> roles) const override;

 private:
  const UbertModel& model_;
  const Vocabulary& vocab_;
};

// Encodes the record's gold annotation and maps it to +/-magnitude logits;
// the ceiling any model could reach.
class GoldScorer final : public TableScorer {
 public:
  explicit GoldScorer(double magnitude = 10.0) : magnitude_(magnitude) {}
  std::vector<StructureTable> score(const DatasetRecord& record, const SchemaInstance& instance,
                                    std::span<const TableRole> roles) const override;

 private:
  double magnitude_;
};

struct RecordPrediction {
  std::map<CategoryLabel, Annotation> annotations;  // classification, ner, relation
  std::vector<std::pair<std::string, EventStructure>> events;
};

RecordPrediction predict(const TableScorer& scorer, const DatasetRecord& record, double threshold);

EvalReport evaluate(const TableScorer& scorer, const std::vector<DatasetRecord>& records,
                    double threshold);
EvalReport evaluate(const UbertModel& model, const Vocabulary& vocab,
                    const std::vector<DatasetRecord>& records, double threshold);

// Largest schema unit any record can produce, including second-stage event
// instances built from the longest token of the text.
std::size_t longest_unit(const std::vector<DatasetRecord>& records);

}  // namespace ubert

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ubert/schema.hpp"
#include "ubert/table_codec.hpp"

namespace ubert {

// One supervised text. Gold spans are raw-text token coordinates; on disk
// they are character offsets.
//
// Event records use task EventTrigger. Their categories list the event types
// as PlainLabel entries and the role inventory as EventRole entries; gold is
// keyed by the event-type label.
struct DatasetRecord {
  TaskKind task = TaskKind::Ner;
  std::string text;
  std::vector<CategoryLabel> categories;
  std::map<CategoryLabel, Annotation> gold;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

// Checks category/task fit, gold keys, annotation kinds and span bounds.
void validate_record(const DatasetRecord& record);

// Categories that become first-stage schema instances for a record.
std::vector<CategoryLabel> primary_categories(const DatasetRecord& record);
// Roles declared for an event type in an event record.
std::vector<std::string> event_roles(const DatasetRecord& record, const std::string& event_type);

std::string record_to_json_line(const DatasetRecord& record);
// `line` is only used in error messages.
DatasetRecord record_from_json_line(const std::string& json, std::size_t line = 0);

void save_dataset(const std::vector<DatasetRecord>& records, std::ostream& out);
void save_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& path);
std::vector<DatasetRecord> load_dataset(std::istream& in);
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path);

// Canonical string key for a category; used as the JSON object key of gold.
std::string category_key(const CategoryLabel& label);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnknown = 1;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> entries);

  // Special tokens live in their own key space so the ";" separator never
  // shares an id with a literal ";".
  static std::string key(const Token& token);

  std::size_t add(const std::string& key);
  std::size_t id(const Token& token) const;
  std::vector<std::size_t> ids(const TokenSequence& tokens) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<std::string>& entries() const noexcept { return entries_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SyntheticSpec {
  TaskKind task = TaskKind::Ner;
  std::size_t vocab_size = 60;
  std::size_t num_records = 500;
  std::size_t max_text_len = 12;
  std::size_t num_categories = 3;
  std::uint64_t seed = 7;

  void validate() const;
};

// Rule-based corpora whose gold structures are exactly recoverable from the
// text:
//  - ner: every token of the k-th marker vocabulary is an entity of type k.
//  - classification: label j applies iff keyword j occurs.
//  - relation: (A, rel, B) holds for "a c b" where a is an A marker, c the
//    connector of rel and b a B marker.
//  - event_trigger: a trigger word of type E fires the event; the argument
//    for role r is the token right after r's connector word.
std::vector<DatasetRecord> generate_synthetic(const SyntheticSpec& spec);

// Deterministic split: the last `fraction` of a seeded permutation is held out.
std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split_dataset(
    const std::vector<DatasetRecord>& records, double held_out_fraction, std::uint64_t seed);

}  // namespace ubert

namespace ubert {

// Every token a schema unit over these records can contain: markers, the
// separator, task words, category words and text words.
Vocabulary build_vocabulary(const std::vector<DatasetRecord>& records);

}  // namespace ubert

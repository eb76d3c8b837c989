#include "ubert/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ubert/errors.hpp"

namespace ubert {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& section) {
  if (!obj.is_object()) throw FormatError(section + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!known.count(k)) throw FormatError(section + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(section + ": key '" + key + "' has the wrong type");
  }
}

void read_count(const json& obj, const char* key, std::size_t& out, const std::string& section) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_unsigned()) throw FormatError(section + ": key '" + key + "' must be a non-negative integer");
  out = it->get<std::size_t>();
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const json j = parse(text, "run config");
  reject_unknown(j, {"model", "train"}, "run config");
  RunConfig c;
  c.model.max_len = 0;
  if (auto it = j.find("model"); it != j.end()) {
    const json& m = *it;
    reject_unknown(m, {"vocab_size", "hidden_dim", "ffn_dim", "encoder_layers", "encoder_heads", "max_len",
                       "seed", "linear_span_ffn"},
                   "model");
    read_count(m, "vocab_size", c.model.vocab_size, "model");
    read_count(m, "hidden_dim", c.model.hidden_dim, "model");
    read_count(m, "ffn_dim", c.model.ffn_dim, "model");
    read_count(m, "encoder_layers", c.model.encoder_layers, "model");
    read_count(m, "encoder_heads", c.model.encoder_heads, "model");
    read_count(m, "max_len", c.model.max_len, "model");
    read(m, "seed", c.model.seed, "model");
    read(m, "linear_span_ffn", c.model.linear_span_ffn, "model");
  }
  if (auto it = j.find("train"); it != j.end()) {
    const json& t = *it;
    reject_unknown(t, {"learning_rate", "epochs", "batch_unit_size", "optimizer", "beta1", "beta2", "epsilon",
                       "grad_clip_norm", "seed", "threshold", "pos_weight"},
                   "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read_count(t, "epochs", c.train.epochs, "train");
    read_count(t, "batch_unit_size", c.train.batch_unit_size, "train");
    if (auto o = t.find("optimizer"); o != t.end()) {
      const std::string name = o->is_string() ? o->get<std::string>() : "";
      if (name == "adam") c.train.optimizer = OptimizerKind::Adam;
      else if (name == "sgd") c.train.optimizer = OptimizerKind::Sgd;
      else throw FormatError("train: optimizer must be \"adam\" or \"sgd\"");
    }
    read(t, "beta1", c.train.beta1, "train");
    read(t, "beta2", c.train.beta2, "train");
    read(t, "epsilon", c.train.epsilon, "train");
    if (auto g = t.find("grad_clip_norm"); g != t.end()) {
      if (g->is_null()) c.train.grad_clip_norm.reset();
      else if (g->is_number()) c.train.grad_clip_norm = g->get<double>();
      else throw FormatError("train: grad_clip_norm must be a number or null");
    }
    read(t, "seed", c.train.seed, "train");
    read(t, "threshold", c.train.threshold, "train");
    read(t, "pos_weight", c.train.pos_weight, "train");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file(path)); }

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"vocab_size", c.model.vocab_size},         {"hidden_dim", c.model.hidden_dim},
                {"ffn_dim", c.model.ffn_dim},               {"encoder_layers", c.model.encoder_layers},
                {"encoder_heads", c.model.encoder_heads},   {"max_len", c.model.max_len},
                {"seed", c.model.seed},                     {"linear_span_ffn", c.model.linear_span_ffn}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"epochs", c.train.epochs},
                {"batch_unit_size", c.train.batch_unit_size},
                {"optimizer", c.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"epsilon", c.train.epsilon},
                {"grad_clip_norm", c.train.grad_clip_norm ? json(*c.train.grad_clip_norm) : json(nullptr)},
                {"seed", c.train.seed},
                {"threshold", c.train.threshold},
                {"pos_weight", c.train.pos_weight}};
  return j.dump(2);
}

std::vector<SyntheticJob> parse_synthetic_jobs(const std::string& text) {
  const json j = parse(text, "synthetic spec");
  std::vector<json> items;
  if (j.is_array()) items.assign(j.begin(), j.end());
  else items.push_back(j);
  if (items.empty()) throw FormatError("synthetic spec: no entries");
  std::vector<SyntheticJob> out;
  for (const json& s : items) {
    reject_unknown(s, {"task", "vocab_size", "num_records", "max_text_len", "num_categories", "seed", "held_out"},
                   "synthetic spec");
    SyntheticJob job;
    std::string task = "ner";
    read(s, "task", task, "synthetic spec");
    job.spec.task = parse_task_id(task);
    read_count(s, "vocab_size", job.spec.vocab_size, "synthetic spec");
    read_count(s, "num_records", job.spec.num_records, "synthetic spec");
    read_count(s, "max_text_len", job.spec.max_text_len, "synthetic spec");
    read_count(s, "num_categories", job.spec.num_categories, "synthetic spec");
    read(s, "seed", job.spec.seed, "synthetic spec");
    read(s, "held_out", job.held_out, "synthetic spec");
    job.spec.validate();
    out.push_back(job);
  }
  return out;
}

std::vector<SyntheticJob> load_synthetic_jobs(const std::filesystem::path& path) {
  return parse_synthetic_jobs(read_file(path));
}

}  // namespace ubert

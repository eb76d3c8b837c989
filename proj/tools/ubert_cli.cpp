// ubert: generate corpora, inspect structure tables, train, evaluate and run
// the codec and gradient self-checks.
//
// Exit codes: 0 success, 1 usage error, 2 validation or data error,
// 3 property failure (roundtrip, gradcheck).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ubert/checkpoint.hpp"
#include "ubert/config_io.hpp"
#include "ubert/data_io.hpp"
#include "ubert/errors.hpp"
#include "ubert/gradcheck.hpp"
#include "ubert/kernels.hpp"
#include "ubert/training.hpp"

namespace fs = std::filesystem;
using namespace ubert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProperty = 3;

struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// UBERT_SEED wins over --seed.
std::optional<std::uint64_t> effective_seed(const std::optional<std::uint64_t>& flag) {
  if (const char* env = std::getenv("UBERT_SEED"); env && *env) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageFailure("UBERT_SEED is not an unsigned integer");
    }
  }
  return flag;
}

// A directory stands for <dir>/<default_name>.
fs::path data_file(const fs::path& p, const char* default_name) {
  return fs::is_directory(p) ? p / default_name : p;
}

std::vector<DatasetRecord> load_records(const fs::path& p, const char* default_name) {
  return load_dataset(data_file(p, default_name));
}

const DatasetRecord& record_at(const std::vector<DatasetRecord>& records, std::size_t i) {
  if (i >= records.size()) {
    throw ValidationError("record " + std::to_string(i) + " out of range (" + std::to_string(records.size()) +
                          " records)");
  }
  return records[i];
}

void print_table(std::ostream& out, const StructureTable& t, bool dense, bool targets) {
  out << "table " << table_role_name(t.role()) << " size " << t.size() << '\n';
  if (dense) {
    if (t.size() > 20) throw UsageFailure("--dense is limited to tables with l <= 20");
    for (std::size_t r = 0; r < t.size(); ++r) {
      for (std::size_t c = 0; c < t.size(); ++c) {
        out << (c ? " " : "") << std::setw(targets ? 1 : 8) << std::setprecision(3) << std::fixed << t.at(r, c);
      }
      out << '\n';
    }
    return;
  }
  for (std::size_t r = 0; r < t.size(); ++r)
    for (std::size_t c = 0; c < t.size(); ++c)
      if (targets ? t.at(r, c) != 0.0 : sigmoid(t.at(r, c)) > 0.5) {
        out << "  (" << r << ", " << c << ", " << std::setprecision(6) << t.at(r, c) << ")\n";
      }
}

void print_instance_header(std::ostream& out, std::size_t k, const SchemaInstance& inst) {
  out << "# instance " << k << " task " << task_id(inst.task) << " category [" << render_category(inst.category)
      << "] l " << inst.length() << " text_offset " << inst.text_token_offset << '\n';
  out << "# tokens";
  for (const Token& t : inst.tokens.tokens) out << ' ' << t.text;
  out << '\n';
}

// ---------------------------------------------------------------------------

int cmd_generate(const fs::path& spec_path, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  std::vector<SyntheticJob> jobs = load_synthetic_jobs(spec_path);
  std::vector<DatasetRecord> train, test;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (seed) jobs[i].spec.seed = *seed + i;
    auto records = generate_synthetic(jobs[i].spec);
    auto [tr, te] = split_dataset(records, jobs[i].held_out, jobs[i].spec.seed);
    train.insert(train.end(), tr.begin(), tr.end());
    test.insert(test.end(), te.begin(), te.end());
  }
  fs::create_directories(out_dir);
  save_dataset(train, out_dir / "train.jsonl");
  save_dataset(test, out_dir / "test.jsonl");
  std::cout << (out_dir / "train.jsonl").string() << ' ' << train.size() << '\n'
            << (out_dir / "test.jsonl").string() << ' ' << test.size() << '\n';
  return kExitOk;
}

int cmd_encode(const fs::path& data, std::size_t index, bool dense) {
  const auto records = load_records(data, "train.jsonl");
  const DatasetRecord& rec = record_at(records, index);
  const Vocabulary vocab = build_vocabulary({rec});
  const TrainingUnit unit = build_unit(rec, vocab, index);
  for (std::size_t k = 0; k < unit.items.size(); ++k) {
    print_instance_header(std::cout, k, unit.items[k].instance);
    for (const StructureTable& t : unit.items[k].targets) print_table(std::cout, t, dense, true);
  }
  return kExitOk;
}

int cmd_decode(const fs::path& data, const fs::path& ckpt_path, std::size_t index, double threshold, bool dense) {
  const auto records = load_records(data, "test.jsonl");
  const DatasetRecord& rec = record_at(records, index);
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const ModelScorer scorer(*ck.model, ck.vocab);
  const RecordPrediction pred = predict(scorer, rec, threshold);

  std::cout << "{\"record\":" << index << ",\"predictions\":[";
  bool first = true;
  for (const auto& [cat, ann] : pred.annotations) {
    std::cout << (first ? "" : ",") << "{\"category\":" << category_to_json_string(cat)
              << ",\"annotation\":" << annotation_to_json_string(ann, rec.text) << '}';
    first = false;
  }
  for (const auto& [type, ev] : pred.events) {
    std::cout << (first ? "" : ",") << "{\"category\":" << category_to_json_string(PlainLabel{type})
              << ",\"annotation\":" << annotation_to_json_string(ev, rec.text) << '}';
    first = false;
  }
  std::cout << "]}\n";
  if (dense) {
    const SchemaBatch batch = build_batch(rec.task, primary_categories(rec), rec.text);
    for (std::size_t k = 0; k < batch.instances.size(); ++k) {
      const SchemaInstance& inst = batch.instances[k];
      print_instance_header(std::cout, k, inst);
      std::vector<TableRole> roles;
      switch (rec.task) {
        case TaskKind::RelationExtraction: roles = {TableRole::HeadEntity, TableRole::TailEntity, TableRole::Coupling}; break;
        case TaskKind::EventTrigger: roles = {TableRole::Trigger}; break;
        default: roles = {TableRole::Single}; break;
      }
      for (const StructureTable& t : scorer.score(rec, inst, roles)) print_table(std::cout, t, true, false);
    }
  }
  return kExitOk;
}

int cmd_train(const fs::path& data, const std::optional<fs::path>& config_path, const fs::path& out,
              std::optional<std::size_t> epochs, std::optional<double> lr, std::optional<std::uint64_t> seed,
              const std::optional<fs::path>& report_path) {
  RunConfig cfg = config_path ? load_run_config(*config_path) : parse_run_config("{}");
  if (epochs) cfg.train.epochs = *epochs;
  if (lr) cfg.train.learning_rate = *lr;
  if (seed) {
    cfg.train.seed = *seed;
    cfg.model.seed = *seed;
  }
  if (cfg.train.epochs < 1) throw UsageFailure("epochs must be at least 1");

  const auto records = load_records(data, "train.jsonl");
  if (records.empty()) throw ValidationError("training data is empty");
  const Vocabulary vocab = build_vocabulary(records);
  cfg.model.vocab_size = vocab.size();
  const std::size_t needed = longest_unit(records);
  if (cfg.model.max_len == 0) cfg.model.max_len = needed + 16;
  if (cfg.model.max_len < needed) {
    throw ValidationError("max_len " + std::to_string(cfg.model.max_len) + " is shorter than the longest unit (" +
                          std::to_string(needed) + ")");
  }
  UbertModel model(cfg.model);
  const auto units = build_units(records, vocab);
  std::cerr << "training on " << units.size() << " units, vocab " << vocab.size() << ", kernels "
            << kernels::active().name << '\n';
  const TrainResult result = train(model, units, cfg.train, [](std::size_t e, double loss) {
    std::cerr << "epoch " << e + 1 << " loss " << loss << '\n';
  });
  save_checkpoint(out, model, vocab);
  std::cout << std::setprecision(17);
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
    std::cout << "epoch " << i + 1 << " loss " << result.loss_history[i] << '\n';
  }
  if (report_path) {
    EvalReport report = evaluate(model, vocab, records, cfg.train.threshold);
    report.loss_curve = result.loss_history;
    std::ofstream(*report_path) << report.to_json() << '\n';
  }
  return kExitOk;
}

int cmd_eval(const fs::path& data, const fs::path& ckpt_path, double threshold, bool as_json) {
  const auto records = load_records(data, "test.jsonl");
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const EvalReport report = evaluate(*ck.model, ck.vocab, records, threshold);
  std::cout << (as_json ? report.to_json() + "\n" : report.to_text());
  return kExitOk;
}

int cmd_roundtrip(const fs::path& data) {
  const fs::path file = data_file(data, "train.jsonl");
  const auto records = load_dataset(file);
  std::size_t failures = 0;
  const GoldScorer gold;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const DatasetRecord& rec = records[i];
    const RecordPrediction pred = predict(gold, rec, 0.5);
    bool ok = true;
    if (rec.task == TaskKind::EventTrigger) {
      std::map<CategoryLabel, Annotation> got;
      for (const auto& [type, ev] : pred.events) ok &= got.emplace(PlainLabel{type}, ev).second;
      ok &= got == rec.gold;
    } else {
      for (const auto& [cat, ann] : pred.annotations) {
        auto it = rec.gold.find(cat);
        const bool empty_gold = std::visit(
            [](const auto& a) {
              using A = std::decay_t<decltype(a)>;
              if constexpr (std::is_same_v<A, LabelFlag>) return !a.applies;
              else if constexpr (std::is_same_v<A, EntitySet>) return a.spans.empty();
              else if constexpr (std::is_same_v<A, RelationSet>) return a.relations.empty();
              else return false;
            },
            ann);
        ok &= it == rec.gold.end() ? empty_gold : it->second == ann;
      }
    }
    std::stringstream ss;
    save_dataset({rec}, ss);
    ok &= load_dataset(ss).front() == rec;
    if (!ok) {
      ++failures;
      std::cerr << "roundtrip mismatch at record " << i << '\n';
    }
  }
  std::cout << "records " << records.size() << " failures " << failures << '\n';
  return failures ? kExitProperty : kExitOk;
}

int cmd_gradcheck(const std::optional<fs::path>& config_path, std::size_t length, double epsilon, double tolerance,
                  std::optional<std::uint64_t> seed) {
  ModelConfig mc;
  mc.vocab_size = 20;
  mc.hidden_dim = 8;
  mc.ffn_dim = 16;
  mc.encoder_layers = 2;
  mc.encoder_heads = 2;
  mc.max_len = 16;
  if (config_path) {
    RunConfig rc = load_run_config(*config_path);
    ModelConfig& m = rc.model;
    if (m.vocab_size == 0) m.vocab_size = mc.vocab_size;
    if (m.max_len == 0) m.max_len = std::max(length, mc.max_len);
    mc = m;
  }
  GradCheckOptions opt;
  opt.sequence_length = length;
  opt.epsilon = epsilon;
  if (seed) {
    opt.seed = *seed;
    mc.seed = *seed;
  }
  if (length == 0 || length > mc.max_len) throw UsageFailure("--length must lie in [1, max_len]");
  const GradCheckReport report = run_gradient_check(mc, opt);
  std::cout << std::scientific << std::setprecision(3);
  for (const GradCheckGroup& g : report.groups) {
    std::cout << g.name << " elements " << g.elements << " rel_err " << g.relative_error << " max_abs "
              << g.max_abs_error << '\n';
  }
  std::cout << "max rel_err " << report.max_relative_error() << '\n';
  return report.max_relative_error() < tolerance ? kExitOk : kExitProperty;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified structure-table extraction: corpus generation, training and checks"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string kernels_name = "auto";
  app.add_option("--kernels", kernels_name, "Kernel set: auto, scalar or avx2");

  fs::path spec_path, out_dir;
  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus (train.jsonl, test.jsonl)");
  gen->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", seed, "Seed override");

  fs::path data;
  std::size_t record = 0;
  bool dense = false;
  auto* enc = app.add_subcommand("encode", "Print the gold structure tables of one record");
  enc->add_option("--data", data, "Dataset file or directory")->required();
  enc->add_option("--record", record, "Record index")->required();
  enc->add_flag("--dense", dense, "Print full grids (l <= 20)");

  fs::path ckpt;
  double threshold = 0.5;
  auto* dec = app.add_subcommand("decode", "Predict one record with a checkpoint");
  dec->add_option("--data", data, "Dataset file or directory")->required();
  dec->add_option("--ckpt", ckpt, "Checkpoint")->required();
  dec->add_option("--record", record, "Record index")->required();
  dec->add_option("--threshold", threshold, "Activation threshold")->check(CLI::Range(0.0, 1.0));
  dec->add_flag("--dense", dense, "Also print score grids (l <= 20)");

  std::optional<fs::path> config_path, report_path;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--data", data, "Training file or directory")->required();
  tr->add_option("--config", config_path, "Run config JSON");
  tr->add_option("--out", ckpt, "Checkpoint output path")->required();
  tr->add_option("--epochs", epochs, "Override epochs");
  tr->add_option("--lr", lr, "Override learning rate");
  tr->add_option("--seed", seed, "Seed for initialization and shuffling");
  tr->add_option("--report", report_path, "Write a JSON training report");

  bool as_json = false;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--data", data, "Evaluation file or directory")->required();
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--threshold", threshold, "Activation threshold")->check(CLI::Range(0.0, 1.0));
  ev->add_flag("--json", as_json, "Machine-readable output");

  auto* rt = app.add_subcommand("roundtrip", "Check encode/decode and save/load identity over a corpus");
  rt->add_option("--data", data, "Dataset file or directory")->required();

  std::size_t length = 6;
  double epsilon = 1e-5, tolerance = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gc->add_option("--config", config_path, "Run config JSON (model section)");
  gc->add_option("--length", length, "Sequence length");
  gc->add_option("--epsilon", epsilon, "Finite-difference step");
  gc->add_option("--tolerance", tolerance, "Maximum relative error");
  gc->add_option("--seed", seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!kernels::select(kernels_name)) throw UsageFailure("kernel set '" + kernels_name + "' is unavailable");
    seed = effective_seed(seed);
    if (*gen) return cmd_generate(spec_path, out_dir, seed);
    if (*enc) return cmd_encode(data, record, dense);
    if (*dec) return cmd_decode(data, ckpt, record, threshold, dense);
    if (*tr) return cmd_train(data, config_path, ckpt, epochs, lr, seed, report_path);
    if (*ev) return cmd_eval(data, ckpt, threshold, as_json);
    if (*rt) return cmd_roundtrip(data);
    if (*gc) return cmd_gradcheck(config_path, length, epsilon, tolerance, seed);
  } catch (const UsageFailure& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

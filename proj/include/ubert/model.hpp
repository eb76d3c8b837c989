#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ubert/table_codec.hpp"
#include "ubert/tensor.hpp"

namespace ubert {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 32;
  std::size_t ffn_dim = 64;
  std::size_t encoder_layers = 2;
  std::size_t encoder_heads = 2;
  std::size_t max_len = 128;
  std::uint64_t seed = 1;
  // Drop the ReLU in the start/end projections.
  bool linear_span_ffn = false;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Biaffine tensors are kept per table family: span tables (single, trigger,
// argument) share one, and each of the three relation tables has its own.
enum class BiaffineHead { Span, Head, Tail, Coupling };
BiaffineHead head_for_role(TableRole role);

struct SpanProjections {
  Var start;  // [l, d+1], last column 1
  Var end;
};

class UbertModel {
 public:
  explicit UbertModel(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }

  // Stable order; names are unique and used by checkpoints.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& parameter(const std::string& name);
  void zero_grad();

  // Graph construction on a caller-owned tape.
  Var encode(Tape& tape, std::span<const std::size_t> ids);
  SpanProjections span_projections(Tape& tape, Var encoded);
  Var score(Tape& tape, const SpanProjections& proj, TableRole role);

  // Inference helpers.
  Tensor encode(std::span<const std::size_t> ids) const;
  std::vector<StructureTable> score_tables(std::span<const std::size_t> ids,
                                           std::span<const TableRole> roles) const;
  StructureTable score_table(std::span<const std::size_t> ids,
                             TableRole role = TableRole::Single) const;

  // Sinusoidal position table [max_len, d].
  const Tensor& positions() const noexcept { return positions_; }

 private:
  struct Layer {
    Parameter ln1_gain, ln1_bias;
    Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter ln2_gain, ln2_bias;
    Parameter w1, b1, w2, b2;
  };

  void check_ids(std::span<const std::size_t> ids) const;
  Parameter& biaffine(BiaffineHead head);

  ModelConfig config_;
  Tensor positions_;
  Parameter embedding_;
  std::vector<Layer> layers_;
  Parameter final_gain_, final_bias_;
  Parameter start_w_, start_b_, end_w_, end_b_;
  Parameter u_span_, u_head_, u_tail_, u_coupling_;
};

// Summed BCE over the flattened concatenation of all score tables against
// their 0/1 targets. Tables are paired by position and must match in shape.
Var bce_loss(Tape& tape, std::span<const Var> scores, std::span<const StructureTable> targets,
             double pos_weight = 1.0);

}  // namespace ubert

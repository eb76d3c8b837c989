#include "ubert/model.hpp"

#include <cmath>

#include "ubert/errors.hpp"
#include "ubert/random.hpp"

namespace ubert {
namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = uniform(rng, -bound, bound);
  return t;
}

Parameter weight(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return Parameter(std::move(name),
                   uniform_tensor({fan_in, fan_out}, 1.0 / std::sqrt(double(fan_in)), rng));
}

Parameter filled(std::string name, std::size_t n, double v) {
  return Parameter(std::move(name), Tensor({n}, v));
}

Tensor sinusoid_table(std::size_t max_len, std::size_t d) {
  Tensor t = Tensor::matrix(max_len, d);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      t.at(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return t;
}

}  // namespace

void ModelConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("model config: ") + what);
  };
  need(vocab_size > 0, "vocab_size must be positive");
  need(hidden_dim > 0, "hidden_dim must be positive");
  need(ffn_dim > 0, "ffn_dim must be positive");
  need(encoder_heads > 0, "encoder_heads must be positive");
  need(max_len > 0, "max_len must be positive");
  need(hidden_dim % encoder_heads == 0, "hidden_dim must be divisible by encoder_heads");
}

BiaffineHead head_for_role(TableRole role) {
  switch (role) {
    case TableRole::HeadEntity: return BiaffineHead::Head;
    case TableRole::TailEntity: return BiaffineHead::Tail;
    case TableRole::Coupling: return BiaffineHead::Coupling;
    default: return BiaffineHead::Span;
  }
}

UbertModel::UbertModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.hidden_dim;
  const std::size_t f = config_.ffn_dim;
  Rng rng(config_.seed);

  positions_ = sinusoid_table(config_.max_len, d);
  embedding_ = Parameter("embedding", uniform_tensor({config_.vocab_size, d}, 1.0 / std::sqrt(double(d)), rng));
  for (std::size_t k = 0; k < config_.encoder_layers; ++k) {
    const std::string p = "encoder." + std::to_string(k) + ".";
    Layer layer{
        filled(p + "ln1.gain", d, 1.0), filled(p + "ln1.bias", d, 0.0),
        weight(p + "attn.wq", d, d, rng), filled(p + "attn.bq", d, 0.0),
        weight(p + "attn.wk", d, d, rng), filled(p + "attn.bk", d, 0.0),
        weight(p + "attn.wv", d, d, rng), filled(p + "attn.bv", d, 0.0),
        weight(p + "attn.wo", d, d, rng), filled(p + "attn.bo", d, 0.0),
        filled(p + "ln2.gain", d, 1.0), filled(p + "ln2.bias", d, 0.0),
        weight(p + "ffn.w1", d, f, rng), filled(p + "ffn.b1", f, 0.0),
        weight(p + "ffn.w2", f, d, rng), filled(p + "ffn.b2", d, 0.0),
    };
    layers_.push_back(std::move(layer));
  }
  final_gain_ = filled("encoder.final_ln.gain", d, 1.0);
  final_bias_ = filled("encoder.final_ln.bias", d, 0.0);
  start_w_ = weight("span.start.weight", d, d, rng);
  start_b_ = filled("span.start.bias", d, 0.0);
  end_w_ = weight("span.end.weight", d, d, rng);
  end_b_ = filled("span.end.bias", d, 0.0);
  const double ub = 1.0 / std::sqrt(double(d + 1));
  u_span_ = Parameter("biaffine.span", uniform_tensor({d + 1, 1, d + 1}, ub, rng));
  u_head_ = Parameter("biaffine.head", uniform_tensor({d + 1, 1, d + 1}, ub, rng));
  u_tail_ = Parameter("biaffine.tail", uniform_tensor({d + 1, 1, d + 1}, ub, rng));
  u_coupling_ = Parameter("biaffine.coupling", uniform_tensor({d + 1, 1, d + 1}, ub, rng));
}

std::vector<Parameter*> UbertModel::parameters() {
  std::vector<Parameter*> out{&embedding_};
  for (Layer& l : layers_) {
    for (Parameter* p : {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv,
                         &l.wo, &l.bo, &l.ln2_gain, &l.ln2_bias, &l.w1, &l.b1, &l.w2, &l.b2}) {
      out.push_back(p);
    }
  }
  for (Parameter* p : {&final_gain_, &final_bias_, &start_w_, &start_b_, &end_w_, &end_b_,
                       &u_span_, &u_head_, &u_tail_, &u_coupling_}) {
    out.push_back(p);
  }
  return out;
}

std::vector<const Parameter*> UbertModel::parameters() const {
  auto mut = const_cast<UbertModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Parameter& UbertModel::parameter(const std::string& name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return *p;
  }
  throw ValidationError("no parameter named '" + name + "'");
}

void UbertModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

Parameter& UbertModel::biaffine(BiaffineHead head) {
  switch (head) {
    case BiaffineHead::Head: return u_head_;
    case BiaffineHead::Tail: return u_tail_;
    case BiaffineHead::Coupling: return u_coupling_;
    case BiaffineHead::Span: break;
  }
  return u_span_;
}

void UbertModel::check_ids(std::span<const std::size_t> ids) const {
  if (ids.empty()) throw ValidationError("empty input sequence");
  if (ids.size() > config_.max_len) {
    throw ValidationError("input of " + std::to_string(ids.size()) + " tokens exceeds max_len " +
                          std::to_string(config_.max_len));
  }
  for (std::size_t id : ids) {
    if (id >= config_.vocab_size) {
      throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(config_.vocab_size));
    }
  }
}

Var UbertModel::encode(Tape& tape, std::span<const std::size_t> ids) {
  check_ids(ids);
  const std::size_t l = ids.size();
  const std::size_t d = config_.hidden_dim;
  const std::size_t heads = config_.encoder_heads;
  const std::size_t dh = d / heads;

  Tensor pos = Tensor::matrix(l, d);
  std::copy_n(positions_.data(), l * d, pos.data());
  Var x = tape.scale(tape.gather_rows(tape.param(embedding_), ids), std::sqrt(double(d)));
  x = tape.add(x, tape.constant(std::move(pos)));

  auto linear = [&](Var in, Parameter& w, Parameter& b) {
    return tape.add_row(tape.matmul(in, tape.param(w)), tape.param(b));
  };

  for (Layer& layer : layers_) {
    Var h = tape.layer_norm(x, tape.param(layer.ln1_gain), tape.param(layer.ln1_bias));
    Var q = linear(h, layer.wq, layer.bq);
    Var k = linear(h, layer.wk, layer.bk);
    Var v = linear(h, layer.wv, layer.bv);
    std::vector<Var> head_out;
    head_out.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      Var qh = tape.slice_cols(q, hd * dh, (hd + 1) * dh);
      Var kh = tape.slice_cols(k, hd * dh, (hd + 1) * dh);
      Var vh = tape.slice_cols(v, hd * dh, (hd + 1) * dh);
      Var att = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh))));
      head_out.push_back(tape.matmul(att, vh));
    }
    Var merged = heads == 1 ? head_out[0] : tape.concat_cols(head_out);
    x = tape.add(x, linear(merged, layer.wo, layer.bo));

    Var h2 = tape.layer_norm(x, tape.param(layer.ln2_gain), tape.param(layer.ln2_bias));
    Var ff = linear(tape.relu(linear(h2, layer.w1, layer.b1)), layer.w2, layer.b2);
    x = tape.add(x, ff);
  }
  return tape.layer_norm(x, tape.param(final_gain_), tape.param(final_bias_));
}

SpanProjections UbertModel::span_projections(Tape& tape, Var encoded) {
  auto project = [&](Parameter& w, Parameter& b) {
    Var h = tape.add_row(tape.matmul(encoded, tape.param(w)), tape.param(b));
    if (!config_.linear_span_ffn) h = tape.relu(h);
    return tape.append_ones(h);
  };
  SpanProjections out;
  out.start = project(start_w_, start_b_);
  out.end = project(end_w_, end_b_);
  return out;
}

Var UbertModel::score(Tape& tape, const SpanProjections& proj, TableRole role) {
  return tape.biaffine(proj.start, tape.param(biaffine(head_for_role(role))), proj.end);
}

Tensor UbertModel::encode(std::span<const std::size_t> ids) const {
  Tape tape;
  auto* self = const_cast<UbertModel*>(this);
  return tape.value(self->encode(tape, ids));
}

std::vector<StructureTable> UbertModel::score_tables(std::span<const std::size_t> ids,
                                                     std::span<const TableRole> roles) const {
  // Inference never calls backward, so the parameters stay untouched.
  auto* self = const_cast<UbertModel*>(this);
  Tape tape;
  const SpanProjections proj = self->span_projections(tape, self->encode(tape, ids));
  std::vector<StructureTable> out;
  out.reserve(roles.size());
  for (TableRole role : roles) {
    const Tensor& s = tape.value(self->score(tape, proj, role));
    StructureTable table(ids.size(), role);
    table.cells() = s.values();
    out.push_back(std::move(table));
  }
  return out;
}

StructureTable UbertModel::score_table(std::span<const std::size_t> ids, TableRole role) const {
  const TableRole roles[] = {role};
  return std::move(score_tables(ids, roles).front());
}

Var bce_loss(Tape& tape, std::span<const Var> scores, std::span<const StructureTable> targets,
             double pos_weight) {
  if (scores.size() != targets.size()) {
    throw ShapeError("bce_loss: " + std::to_string(scores.size()) + " score tables but " +
                     std::to_string(targets.size()) + " targets");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (tape.value(scores[i]).size() != targets[i].cells().size()) {
      throw ShapeError("bce_loss: score table " + shape_string(tape.shape(scores[i])) +
                       " does not match a target of size " + std::to_string(targets[i].size()));
    }
    total += targets[i].cells().size();
  }
  Tensor y({total});
  std::size_t off = 0;
  for (const StructureTable& t : targets) {
    std::copy(t.cells().begin(), t.cells().end(), y.data() + off);
    off += t.cells().size();
  }
  return tape.bce_with_logits(tape.flatten_concat(scores), y, pos_weight);
}

}  // namespace ubert

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support/oracle.hpp"
#include "ubert/errors.hpp"
#include "ubert/gradcheck.hpp"
#include "ubert/kernels.hpp"
#include "ubert/model.hpp"
#include "ubert/random.hpp"

using namespace ubert;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 20;
  c.hidden_dim = 8;
  c.ffn_dim = 16;
  c.encoder_layers = 2;
  c.encoder_heads = 2;
  c.max_len = 16;
  c.seed = 5;
  return c;
}

Tensor cols(const Tensor& t, std::size_t begin, std::size_t end) {
  Tensor out({t.rows(), end - begin});
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out.at(r, c - begin) = t.at(r, c);
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor grad_of(UbertModel& model, const std::string& name) { return model.parameter(name).grad; }

}  // namespace

TEST_SUITE("model") {

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.encoder_heads = 3;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small_config();
  c.vocab_size = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("parameter inventory") {
  UbertModel model(small_config());
  std::set<std::string> names;
  for (const Parameter* p : model.parameters()) CHECK(names.insert(p->name).second);
  CHECK(names.count("embedding"));
  CHECK(names.count("span.start.weight"));
  CHECK(names.count("span.end.bias"));
  CHECK(model.parameter("biaffine.span").value.shape() == Shape{9, 1, 9});
  CHECK(model.parameter("span.start.weight").value.shape() == Shape{8, 8});
  CHECK_THROWS(model.parameter("nope"));
  for (const Parameter* p : model.parameters())
    for (double v : p->value.values()) CHECK(std::isfinite(v));
}

TEST_CASE("encode shapes and errors") {
  UbertModel model(small_config());
  const std::vector<std::size_t> one{3};
  CHECK(model.encode(one).shape() == Shape{1, 8});
  const std::vector<std::size_t> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const StructureTable t = model.score_table(ten);
  CHECK(t.size() == 10);
  CHECK(t.role() == TableRole::Single);
  const std::vector<std::size_t> bad{1, 20};
  CHECK_THROWS_AS(model.encode(bad), ValidationError);
  const std::vector<std::size_t> too_long(17, 1);
  CHECK_THROWS_AS(model.encode(too_long), ValidationError);
}

TEST_CASE("encoder is contextual and deterministic") {
  UbertModel model(small_config());
  const std::vector<std::size_t> a{4, 5, 6, 7, 8}, b{4, 7, 6, 5, 8};
  const Tensor ea = model.encode(a), eb = model.encode(b);
  double diff = 0;
  for (std::size_t c = 0; c < 8; ++c) diff = std::max(diff, std::abs(ea.at(0, c) - eb.at(0, c)));
  CHECK(diff > 1e-9);
  UbertModel twin(small_config());
  CHECK(model.encode(a) == twin.encode(a));
  CHECK(model.encode(a) == model.encode(a));
}

TEST_CASE("span projections") {
  UbertModel model(small_config());
  const std::vector<std::size_t> ids{2, 3, 4, 5};
  {
    Tape tape;
    const SpanProjections p = model.span_projections(tape, model.encode(tape, ids));
    const Tensor& hs = tape.value(p.start);
    CHECK(hs.shape() == Shape{4, 9});
    for (std::size_t r = 0; r < 4; ++r) CHECK(hs.at(r, 8) == 1.0);
  }
  Tensor hs_before;
  {
    Tape tape;
    hs_before = tape.value(model.span_projections(tape, model.encode(tape, ids)).start);
  }
  for (double& v : model.parameter("span.end.weight").value.values()) v *= -3.0;
  {
    Tape tape;
    const SpanProjections p = model.span_projections(tape, model.encode(tape, ids));
    CHECK(tape.value(p.start) == hs_before);
  }
  model.parameter("span.end.weight").value = model.parameter("span.start.weight").value;
  model.parameter("span.end.bias").value = model.parameter("span.start.bias").value;
  {
    Tape tape;
    const SpanProjections p = model.span_projections(tape, model.encode(tape, ids));
    CHECK(tape.value(p.start) == tape.value(p.end));
  }
}

TEST_CASE("scores follow the biaffine definition") {
  UbertModel model(small_config());
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> ids(1 + uniform_index(rng, 8));
    for (std::size_t& id : ids) id = uniform_index(rng, 20);
    Tape tape;
    const SpanProjections p = model.span_projections(tape, model.encode(tape, ids));
    for (TableRole role : {TableRole::Single, TableRole::HeadEntity, TableRole::TailEntity, TableRole::Coupling}) {
      const Tensor& u = model.parameter(role == TableRole::Single       ? "biaffine.span"
                                        : role == TableRole::HeadEntity ? "biaffine.head"
                                        : role == TableRole::TailEntity ? "biaffine.tail"
                                                                        : "biaffine.coupling")
                            .value;
      const Tensor got = tape.value(model.score(tape, p, role));
      CHECK(max_abs_diff(got, oracle::biaffine(tape.value(p.start), u, tape.value(p.end))) < 1e-12);
      const std::array<TableRole, 1> roles{role};
      const StructureTable table = model.score_tables(ids, roles).front();
      CHECK(table.cells() == got.values());
      CHECK(table.role() == role);
    }
  }
}

TEST_CASE("zero biaffine tensor decodes to nothing") {
  UbertModel model(small_config());
  model.parameter("biaffine.span").value.fill(0.0);
  const std::vector<std::size_t> ids{1, 2, 3, 4, 5, 6};
  const StructureTable t = model.score_table(ids);
  for (double v : t.cells()) CHECK(v == 0.0);
  CHECK(decode_table(t, 0.5, 0).empty());
}

TEST_CASE("zeroed augmentation recovers the bias-free form") {
  UbertModel model(small_config());
  const std::size_t d = 8;
  Tensor& u = model.parameter("biaffine.span").value;
  for (std::size_t a = 0; a <= d; ++a) {
    u[a * (d + 1) + d] = 0.0;
    u[d * (d + 1) + a] = 0.0;
  }
  Tensor core({d, 1, d});
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) core[a * d + b] = u[a * (d + 1) + b];
  const std::vector<std::size_t> ids{3, 1, 4, 1, 5, 9};
  Tape tape;
  const SpanProjections p = model.span_projections(tape, model.encode(tape, ids));
  const Tensor got = tape.value(model.score(tape, p, TableRole::Single));
  const Tensor hs = cols(tape.value(p.start), 0, d), he = cols(tape.value(p.end), 0, d);
  const Tensor plain = tape.value(tape.biaffine(tape.constant(hs), tape.constant(core), tape.constant(he)));
  CHECK(got == plain);
  CHECK(max_abs_diff(got, oracle::biaffine(hs, core, he)) < 1e-12);
}

TEST_CASE("bce loss") {
  Tape tape;
  StructureTable y(4, TableRole::Single);
  y.at(0, 1) = 1;
  y.at(2, 3) = 1;
  StructureTable y2(3, TableRole::Coupling);
  y2.at(1, 0) = 1;
  const std::vector<StructureTable> targets{y, y2};

  std::vector<Var> perfect;
  for (const StructureTable& t : targets) {
    Tensor s({t.size(), t.size()});
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = t.cells()[i] > 0.5 ? 50.0 : -50.0;
    perfect.push_back(tape.constant(s));
  }
  CHECK(tape.value(bce_loss(tape, perfect, targets))[0] < 1e-9);

  const std::vector<Var> zeros{tape.constant(Tensor({4, 4})), tape.constant(Tensor({3, 3}))};
  CHECK(std::abs(tape.value(bce_loss(tape, zeros, targets))[0] - 25 * std::numbers::ln2) < 1e-9);

  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Var> scores;
    std::vector<StructureTable> ts;
    std::vector<double> flat_logits, flat_targets;
    const std::size_t m = 1 + uniform_index(rng, 4);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t l = 1 + uniform_index(rng, 10);
      Tensor s({l, l});
      StructureTable t(l, TableRole::Single);
      for (std::size_t i = 0; i < l * l; ++i) {
        s[i] = uniform(rng, -12, 12);
        t.cells()[i] = bernoulli(rng, 0.2) ? 1.0 : 0.0;
        flat_logits.push_back(s[i]);
        flat_targets.push_back(t.cells()[i]);
      }
      scores.push_back(tape.constant(s));
      ts.push_back(t);
    }
    const double loss = tape.value(bce_loss(tape, scores, ts))[0];
    CHECK(loss >= 0.0);
    CHECK(std::abs(loss - oracle::bce(flat_logits, flat_targets)) < 1e-10);
  }

  const std::vector<Var> wrong{tape.constant(Tensor({3, 3}))};
  const std::vector<StructureTable> wrong_t{StructureTable(4, TableRole::Single)};
  CHECK_THROWS_AS(bce_loss(tape, wrong, wrong_t), ShapeError);
}

TEST_CASE("gradient check on the whole model") {
  const GradCheckReport report = run_gradient_check(small_config(), {6, 1e-5, 3});
  std::set<std::string> groups;
  for (const GradCheckGroup& g : report.groups) {
    groups.insert(g.name);
    CHECK(g.elements > 0);
    CHECK_MESSAGE(g.relative_error < 1e-4, g.name << " " << g.relative_error);
  }
  CHECK(groups == std::set<std::string>{"embeddings", "encoder", "span_start", "span_end", "biaffine"});
  CHECK(parameter_group("encoder.1.attn.wq") == "encoder");
  CHECK(parameter_group("span.end.bias") == "span_end");
}

TEST_CASE("linear span projections pass the gradient check") {
  ModelConfig c = small_config();
  c.linear_span_ffn = true;
  CHECK(run_gradient_check(c, {5, 1e-5, 4}).max_relative_error() < 1e-4);
}

TEST_CASE("start gradients depend on the end branch only through its outputs") {
  const std::vector<std::size_t> ids{2, 5, 7, 11, 13};
  StructureTable target(ids.size(), TableRole::Single);
  target.at(1, 3) = 1;
  target.at(4, 4) = 1;
  const std::vector<StructureTable> targets{target};

  auto start_grad = [&](UbertModel& model, bool freeze_end) {
    model.zero_grad();
    Tape tape;
    SpanProjections p = model.span_projections(tape, model.encode(tape, ids));
    if (freeze_end) p.end = tape.constant(tape.value(p.end));
    const std::vector<Var> scores{model.score(tape, p, TableRole::Single)};
    tape.backward(bce_loss(tape, scores, targets));
    return std::make_pair(grad_of(model, "span.start.weight"), grad_of(model, "span.start.bias"));
  };

  UbertModel model(small_config());
  const auto live = start_grad(model, false);
  const auto frozen = start_grad(model, true);
  CHECK(live == frozen);

  // Permute the end hidden units together with the matching U columns: h_e
  // is reordered, every score is unchanged and so is the start gradient.
  const std::size_t d = 8;
  UbertModel permuted(small_config());
  Tensor& we = permuted.parameter("span.end.weight").value;
  Tensor& be = permuted.parameter("span.end.bias").value;
  Tensor& u = permuted.parameter("biaffine.span").value;
  const Tensor we0 = we, be0 = be, u0 = u;
  auto perm = [&](std::size_t j) { return (j * 3 + 1) % d; };
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) we.at(i, perm(j)) = we0.at(i, j);
    be[perm(j)] = be0[j];
    for (std::size_t a = 0; a <= d; ++a) u[a * (d + 1) + perm(j)] = u0[a * (d + 1) + j];
  }
  const auto reparam = start_grad(permuted, false);
  CHECK(max_abs_diff(reparam.first, live.first) < 1e-12);
  CHECK(max_abs_diff(reparam.second, live.second) < 1e-12);
}

TEST_CASE("model output agrees across kernel sets") {
  UbertModel model(small_config());
  const std::vector<std::size_t> ids{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::string_view before = kernels::active().name;
  std::vector<StructureTable> outs;
  for (const kernels::KernelSet* ks : kernels::available()) {
    REQUIRE(kernels::select(ks->name));
    outs.push_back(model.score_table(ids));
  }
  kernels::select(before);
  for (const StructureTable& t : outs) {
    for (std::size_t i = 0; i < t.cells().size(); ++i) CHECK(std::abs(t.cells()[i] - outs[0].cells()[i]) < 1e-10);
  }
}

}

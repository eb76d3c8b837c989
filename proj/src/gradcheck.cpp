#include "ubert/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ubert/random.hpp"

namespace ubert {

double GradCheckReport::max_relative_error() const {
  double m = 0.0;
  for (const GradCheckGroup& g : groups) m = std::max(m, g.relative_error);
  return m;
}

std::string parameter_group(const std::string& name) {
  if (name == "embedding") return "embeddings";
  if (name.rfind("encoder.", 0) == 0) return "encoder";
  if (name.rfind("span.start.", 0) == 0) return "span_start";
  if (name.rfind("span.end.", 0) == 0) return "span_end";
  if (name.rfind("biaffine.", 0) == 0) return "biaffine";
  return "other";
}

namespace {

constexpr TableRole kRoles[] = {TableRole::Single, TableRole::HeadEntity, TableRole::TailEntity,
                                TableRole::Coupling};

double loss_at(UbertModel& model, const std::vector<std::size_t>& ids,
               const std::vector<StructureTable>& targets, bool with_backward) {
  Tape tape;
  const SpanProjections proj = model.span_projections(tape, model.encode(tape, ids));
  std::vector<Var> scores;
  for (TableRole r : kRoles) scores.push_back(model.score(tape, proj, r));
  const Var loss = bce_loss(tape, scores, targets);
  if (with_backward) tape.backward(loss);
  return tape.value(loss)[0];
}

}  // namespace

GradCheckReport run_gradient_check(const ModelConfig& config, const GradCheckOptions& options) {
  UbertModel model(config);
  Rng rng(options.seed);
  const std::size_t l = options.sequence_length;
  std::vector<std::size_t> ids(l);
  for (auto& id : ids) id = uniform_index(rng, config.vocab_size);
  std::vector<StructureTable> targets;
  for (TableRole r : kRoles) {
    StructureTable t(l, r);
    for (double& c : t.cells()) c = bernoulli(rng, 0.3) ? 1.0 : 0.0;
    targets.push_back(std::move(t));
  }

  model.zero_grad();
  loss_at(model, ids, targets, true);

  struct Acc {
    double diff2 = 0, a2 = 0, n2 = 0, max_abs = 0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> acc;
  std::vector<std::string> order;
  const double eps = options.epsilon;
  for (Parameter* p : model.parameters()) {
    const std::string group = parameter_group(p->name);
    if (!acc.count(group)) order.push_back(group);
    Acc& a = acc[group];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = loss_at(model, ids, targets, false);
      p->value[i] = saved - eps;
      const double down = loss_at(model, ids, targets, false);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[i];
      a.diff2 += (analytic - numeric) * (analytic - numeric);
      a.a2 += analytic * analytic;
      a.n2 += numeric * numeric;
      a.max_abs = std::max(a.max_abs, std::abs(analytic - numeric));
      ++a.n;
    }
  }

  GradCheckReport report;
  for (const std::string& g : order) {
    const Acc& a = acc[g];
    const double denom = std::sqrt(a.a2) + std::sqrt(a.n2);
    report.groups.push_back({g, a.n, denom > 0 ? std::sqrt(a.diff2) / denom : 0.0, a.max_abs});
  }
  return report;
}

}  // namespace ubert

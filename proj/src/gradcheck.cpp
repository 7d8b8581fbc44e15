#include "lcc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lcc/errors.hpp"

namespace lcc {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check_detailed(const LossBuilder& build, const std::vector<Tensor>& params, double step,
                                    std::uint64_t seed) {
  if (!(step > 0.0)) throw ContractViolation("grad_check: step must be positive");
  for (const auto& p : params)
    if (!p.all_finite()) throw ContractViolation("grad_check: inputs must be finite");

  auto evaluate = [&](const std::vector<Tensor>& values, Gradients* grads) {
    Graph g(seed);
    std::vector<NodeId> ids;
    for (const auto& v : values) ids.push_back(g.parameter(v));
    const NodeId loss = build(g, ids);
    if (grads) *grads = g.backward(loss);
    return std::make_pair(g.value(loss).item(), ids);
  };

  Gradients analytic;
  const auto ids = evaluate(params, &analytic).second;

  GradCheckResult worst;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& grad = analytic.at(ids[p]);
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double x = params[p][i];
      probe[p][i] = x + step;
      const double fp = evaluate(probe, nullptr).first;
      probe[p][i] = x - step;
      const double fm = evaluate(probe, nullptr).first;
      probe[p][i] = x;
      const double numeric = (fp - fm) / (2.0 * step);
      const double err = relative_error(grad[i], numeric);
      if (err > worst.max_relative_error) worst = {err, p, i, grad[i], numeric};
    }
  }
  return worst;
}

double grad_check_composite(const LossBuilder& build, const std::vector<Tensor>& params, double step,
                            std::uint64_t seed) {
  return grad_check_detailed(build, params, step, seed).max_relative_error;
}

double grad_check(OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs, double step) {
  const auto& ops = differentiable_ops();
  if (std::find(ops.begin(), ops.end(), kind) == ops.end())
    throw UnsupportedOp("grad_check: op '" + std::string(op_name(kind)) + "' has no registered derivative");

  std::vector<Shape> shapes;
  for (const auto& t : inputs) shapes.push_back(t.shape());
  const Shape out_shape = infer_shape(kind, shapes, attrs);
  Tensor weights(out_shape, 1.0);
  if (numel(out_shape) > 1) {
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (auto& w : weights.values()) w = u(rng);
  }
  LossBuilder build = [&](Graph& g, const std::vector<NodeId>& ids) {
    const NodeId y = g.apply(kind, ids, attrs);
    if (numel(out_shape) == 1) return y;
    return g.sum(g.mul(y, g.constant(weights)));
  };
  return grad_check_composite(build, inputs, step);
}

}  // namespace lcc

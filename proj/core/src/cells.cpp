#include "kpc/cells.hpp"

#include "kpc/baselines.hpp"
#include "kpc/shape_plan.hpp"

#include <cmath>

namespace kpc {

Index gate_count(CellFamily family) {
  switch (family) {
    case CellFamily::Rnn: return 1;
    case CellFamily::Lstm: return 4;
    case CellFamily::Gru: return 3;
    case CellFamily::FastRnn: return 1;
  }
  return 0;
}

const char* family_name(CellFamily family) {
  switch (family) {
    case CellFamily::Rnn: return "rnn";
    case CellFamily::Lstm: return "lstm";
    case CellFamily::Gru: return "gru";
    case CellFamily::FastRnn: return "fastrnn";
  }
  return "?";
}

const char* operator_kind_name(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Dense: return "dense";
    case OperatorKind::Kron: return "kron";
    case OperatorKind::LowRank: return "lowrank";
    case OperatorKind::Sparse: return "sparse";
  }
  return "?";
}

CellFamily parse_family(const std::string& s) {
  if (s == "rnn") return CellFamily::Rnn;
  if (s == "lstm") return CellFamily::Lstm;
  if (s == "gru") return CellFamily::Gru;
  if (s == "fastrnn") return CellFamily::FastRnn;
  throw ParseError("unknown cell family: " + s);
}

OperatorKind parse_operator_kind(const std::string& s) {
  if (s == "dense") return OperatorKind::Dense;
  if (s == "kron") return OperatorKind::Kron;
  if (s == "lowrank") return OperatorKind::LowRank;
  if (s == "sparse") return OperatorKind::Sparse;
  throw ParseError("unknown operator kind: " + s);
}

std::int64_t CellParams::weight_parameter_count() const {
  std::int64_t total = 0;
  for (const auto& op : ops) total += op.parameter_count();
  return total;
}

std::int64_t CellParams::parameter_count() const {
  return weight_parameter_count() + bias.size() + (use_scalars ? 2 : 0);
}

std::int64_t dense_cell_parameter_count(const CellSpec& spec) {
  const std::int64_t rows = spec.stacked_rows();
  std::int64_t total = rows * spec.concat_size();
  if (spec.bias) total += rows;
  if (spec.family == CellFamily::FastRnn) total += 2;
  return total;
}

namespace {

// Factor entries drawn so the materialized product matches Glorot variance:
// Var(b*c) = Var_B*Var_C must equal limit^2/3.
LinearOperator init_operator(OperatorKind kind, Index rows, Index cols, Rng& rng,
                             const InitOptions& opts) {
  const double glorot = std::sqrt(6.0 / static_cast<double>(rows + cols));
  switch (kind) {
    case OperatorKind::Dense:
      return LinearOperator::dense(uniform_matrix(rows, cols, glorot, rng));
    case OperatorKind::Kron: {
      ShapePlan plan = plan_factor_shapes(rows, cols);
      const double lim = std::sqrt(glorot * std::sqrt(3.0));
      return LinearOperator::kron(
          uniform_matrix(plan.shape1.rows, plan.shape1.cols, lim, rng),
          uniform_matrix(plan.shape2.rows, plan.shape2.cols, lim, rng));
    }
    case OperatorKind::LowRank: {
      std::int64_t budget = opts.lowrank_budget;
      if (budget <= 0) budget = std::max<std::int64_t>(plan_factor_shapes(rows, cols).cost, rows + cols);
      LowRankPair lr = lowrank_for_budget(rows, cols, budget);
      const double var = glorot * glorot / 3.0;
      const double lim = std::sqrt(3.0 * std::sqrt(var / static_cast<double>(lr.rank())));
      lr.U = uniform_matrix(lr.U.rows(), lr.U.cols(), lim, rng);
      lr.V = uniform_matrix(lr.V.rows(), lr.V.cols(), lim, rng);
      return LinearOperator::low_rank(std::move(lr.U), std::move(lr.V));
    }
    case OperatorKind::Sparse: {
      double sparsity = opts.sparsity;
      if (sparsity < 0.0) {
        const double kron_cost = static_cast<double>(plan_factor_shapes(rows, cols).cost);
        sparsity = 1.0 - kron_cost / (static_cast<double>(rows) * static_cast<double>(cols));
        sparsity = std::clamp(sparsity, 0.0, 0.99);
      }
      Matd W = uniform_matrix(rows, cols, glorot, rng);
      return LinearOperator::sparse(magnitude_prune(W, sparsity));
    }
  }
  throw ShapeError("init_operator: bad kind");
}

}  // namespace

CellParams init_cell(const CellSpec& spec, Rng& rng, const InitOptions& opts) {
  if (spec.input_size < 1 || spec.hidden_size < 1)
    throw ShapeError("init_cell: input and hidden sizes must be >= 1");
  CellParams params;
  if (spec.per_gate) {
    for (Index g = 0; g < gate_count(spec.family); ++g)
      params.ops.push_back(init_operator(spec.kind, spec.hidden_size, spec.concat_size(), rng, opts));
  } else {
    params.ops.push_back(init_operator(spec.kind, spec.stacked_rows(), spec.concat_size(), rng, opts));
  }
  if (spec.bias) {
    params.bias = Vecd::Zero(spec.stacked_rows());
    if (spec.family == CellFamily::Lstm)
      params.bias.segment(spec.hidden_size, spec.hidden_size).setOnes();  // forget gate
  }
  if (spec.family == CellFamily::FastRnn) {
    params.use_scalars = true;
    const double raw = std::log(0.95 / 0.05);  // sigmoid^-1(0.95)
    params.alpha_raw = -raw;                   // update weight starts at 0.05
    params.beta_raw = raw;                     // carry weight starts at 0.95
  }
  return params;
}

CellParams zeros_like_cell(const CellParams& params) {
  CellParams z;
  for (const auto& op : params.ops) z.ops.push_back(zeros_like(op));
  if (params.bias.size() > 0) z.bias = Vecd::Zero(params.bias.size());
  z.use_scalars = params.use_scalars;
  z.alpha_raw = 0.0;
  z.beta_raw = 0.0;
  return z;
}

CellState initial_state(const CellSpec& spec) {
  CellState s;
  s.h = Vecd::Zero(spec.hidden_size);
  if (spec.family == CellFamily::Lstm) s.c = Vecd::Zero(spec.hidden_size);
  return s;
}

namespace {

void check_step_shapes(const CellSpec& spec, const CellParams& params,
                       const Eigen::Ref<const Vecd>& x, const Eigen::Ref<const Vecd>& h) {
  if (x.size() != spec.input_size || h.size() != spec.hidden_size)
    throw ShapeError("cell step: input/hidden length mismatch");
  const Index want_ops = spec.per_gate ? gate_count(spec.family) : 1;
  if (static_cast<Index>(params.ops.size()) != want_ops)
    throw ShapeError("cell step: operator count mismatch");
  const Index op_rows = spec.per_gate ? spec.hidden_size : spec.stacked_rows();
  for (const auto& op : params.ops)
    if (op.rows() != op_rows || op.cols() != spec.concat_size())
      throw ShapeError("cell step: operator shape mismatch");
  if (params.bias.size() != 0 && params.bias.size() != spec.stacked_rows())
    throw ShapeError("cell step: bias length mismatch");
}

// Stacked pre-activation over all gates for input u = [x; h-like].
Vecd gate_preactivation(const CellSpec& spec, const CellParams& params, const Vecd& u) {
  Vecd z(spec.stacked_rows());
  if (spec.per_gate) {
    const Index m = spec.hidden_size;
    for (Index g = 0; g < gate_count(spec.family); ++g)
      z.segment(g * m, m) = params.ops[g].apply(u);
  } else {
    z = params.ops[0].apply(u);
  }
  if (params.bias.size() > 0) z += params.bias;
  return z;
}

Vecd concat(const Eigen::Ref<const Vecd>& a, const Eigen::Ref<const Vecd>& b) {
  Vecd u(a.size() + b.size());
  u << a, b;
  return u;
}

}  // namespace

Vecd rnn_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
              const Eigen::Ref<const Vecd>& h, StepCache* cache) {
  check_step_shapes(spec, params, x, h);
  Vecd u = concat(x, h);
  Vecd z = gate_preactivation(spec, params, u);
  Vecd h_new = z.array().tanh().matrix();
  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->candidate = h_new;
    cache->h_new = h_new;
  }
  return h_new;
}

CellState lstm_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
                    const CellState& state, StepCache* cache) {
  check_step_shapes(spec, params, x, state.h);
  if (state.c.size() != spec.hidden_size) throw ShapeError("lstm_step: cell state length mismatch");
  const Index m = spec.hidden_size;
  Vecd u = concat(x, state.h);
  Vecd z = gate_preactivation(spec, params, u);
  Vecd gates(4 * m);
  gates.segment(0, m) = z.segment(0, m).unaryExpr([](double v) { return sigmoid(v); });        // i
  gates.segment(m, m) = z.segment(m, m).unaryExpr([](double v) { return sigmoid(v); });        // f
  gates.segment(2 * m, m) = z.segment(2 * m, m).array().tanh().matrix();                       // g
  gates.segment(3 * m, m) = z.segment(3 * m, m).unaryExpr([](double v) { return sigmoid(v); });  // o
  CellState out;
  out.c = gates.segment(m, m).cwiseProduct(state.c) +
          gates.segment(0, m).cwiseProduct(gates.segment(2 * m, m));
  out.h = gates.segment(3 * m, m).cwiseProduct(out.c.array().tanh().matrix());
  if (cache) {
    cache->x = x;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->c_new = out.c;
    cache->gates = gates;
    cache->h_new = out.h;
  }
  return out;
}

Vecd gru_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
              const Eigen::Ref<const Vecd>& h, StepCache* cache) {
  check_step_shapes(spec, params, x, h);
  const Index m = spec.hidden_size;
  Vecd u1 = concat(x, h);
  Vecd r(m), zg(m), n(m);
  if (spec.per_gate) {
    Vecd zr = params.ops[0].apply(u1);
    Vecd zz = params.ops[1].apply(u1);
    if (params.bias.size() > 0) {
      zr += params.bias.segment(0, m);
      zz += params.bias.segment(m, m);
    }
    r = zr.unaryExpr([](double v) { return sigmoid(v); });
    zg = zz.unaryExpr([](double v) { return sigmoid(v); });
    Vecd u2 = concat(x, r.cwiseProduct(h));
    Vecd zn = params.ops[2].apply(u2);
    if (params.bias.size() > 0) zn += params.bias.segment(2 * m, m);
    n = zn.array().tanh().matrix();
  } else {
    // The stacked operator cannot be row-sliced without expansion, so it is
    // applied twice: once on [x;h] for r,z and once on [x;r.*h] for the
    // candidate rows.
    Vecd z1 = params.ops[0].apply(u1);
    if (params.bias.size() > 0) z1 += params.bias;
    r = z1.segment(0, m).unaryExpr([](double v) { return sigmoid(v); });
    zg = z1.segment(m, m).unaryExpr([](double v) { return sigmoid(v); });
    Vecd u2 = concat(x, r.cwiseProduct(h));
    Vecd z2 = params.ops[0].apply(u2);
    if (params.bias.size() > 0) z2 += params.bias;
    n = z2.segment(2 * m, m).array().tanh().matrix();
  }
  Vecd h_new = zg.cwiseProduct(h) + (Vecd::Ones(m) - zg).cwiseProduct(n);
  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->gates = concat(r, zg);
    cache->candidate = n;
    cache->h_new = h_new;
  }
  return h_new;
}

Vecd fastrnn_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
                  const Eigen::Ref<const Vecd>& h, StepCache* cache) {
  check_step_shapes(spec, params, x, h);
  Vecd u = concat(x, h);
  Vecd zf = gate_preactivation(spec, params, u);
  Vecd h_tilde = zf.array().tanh().matrix();
  const double alpha = sigmoid(params.alpha_raw);
  const double beta = sigmoid(params.beta_raw);
  Vecd h_new = alpha * h_tilde + beta * h;
  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->candidate = h_tilde;
    cache->h_new = h_new;
  }
  return h_new;
}

CellState cell_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
                    const CellState& state, StepCache* cache) {
  CellState out;
  switch (spec.family) {
    case CellFamily::Rnn:
      out.h = rnn_step(spec, params, x, state.h, cache);
      break;
    case CellFamily::Lstm:
      out = lstm_step(spec, params, x, state, cache);
      break;
    case CellFamily::Gru:
      out.h = gru_step(spec, params, x, state.h, cache);
      break;
    case CellFamily::FastRnn:
      out.h = fastrnn_step(spec, params, x, state.h, cache);
      break;
  }
  return out;
}

Trajectory sequence_forward(const CellSpec& spec, const CellParams& params,
                            const std::vector<Vecd>& xs, bool record) {
  if (xs.empty()) throw ShapeError("sequence_forward: empty sequence");
  Trajectory traj;
  traj.states.reserve(xs.size() + 1);
  traj.states.push_back(initial_state(spec));
  if (record) traj.caches.resize(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    StepCache* cache = record ? &traj.caches[t] : nullptr;
    traj.states.push_back(cell_step(spec, params, xs[t], traj.states.back(), cache));
  }
  return traj;
}

std::vector<Vecd> bidirectional_forward(const CellSpec& spec, const CellParams& fwd,
                                        const CellParams& bwd, const std::vector<Vecd>& xs,
                                        Trajectory* fwd_traj, Trajectory* bwd_traj, bool record) {
  if (xs.empty()) throw ShapeError("bidirectional_forward: empty sequence");
  std::vector<Vecd> reversed(xs.rbegin(), xs.rend());
  Trajectory f = sequence_forward(spec, fwd, xs, record);
  Trajectory b = sequence_forward(spec, bwd, reversed, record);
  const std::size_t T = xs.size();
  std::vector<Vecd> out(T);
  for (std::size_t t = 0; t < T; ++t)
    out[t] = concat(f.states[t + 1].h, b.states[T - t].h);  // bwd state for original step t
  if (fwd_traj) *fwd_traj = std::move(f);
  if (bwd_traj) *bwd_traj = std::move(b);
  return out;
}

void collect_tensors(CellParams& params, const std::string& prefix, std::vector<TensorView>& out) {
  for (std::size_t i = 0; i < params.ops.size(); ++i) {
    const std::string op_prefix = prefix + "op" + std::to_string(i) + ".";
    params.ops[i].for_each_tensor([&](const char* name, double* data, Index size, Index, Index) {
      out.push_back({op_prefix + name, data, size});
    });
  }
  if (params.bias.size() > 0) out.push_back({prefix + "bias", params.bias.data(), params.bias.size()});
  if (params.use_scalars) {
    out.push_back({prefix + "alpha_raw", &params.alpha_raw, 1});
    out.push_back({prefix + "beta_raw", &params.beta_raw, 1});
  }
}

}  // namespace kpc

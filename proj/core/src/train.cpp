#include "kpc/train.hpp"

#include "kpc/shape_plan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kpc {

Dataset make_separable_dataset(Index n_sequences, Index timesteps, Index features,
                               std::uint64_t seed) {
  if (n_sequences < 1 || timesteps < 1 || features < 1)
    throw SizeError("make_separable_dataset: all sizes must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> noise(-0.2, 0.2);
  Dataset data(n_sequences);
  for (Index i = 0; i < n_sequences; ++i) {
    Sequence& s = data[i];
    s.label = static_cast<int>(i % 2);
    const double mean = s.label == 0 ? 0.3 : -0.3;
    s.xs.resize(timesteps);
    for (Index t = 0; t < timesteps; ++t) {
      s.xs[t].resize(features);
      for (Index f = 0; f < features; ++f) s.xs[t][f] = mean + noise(rng);
    }
  }
  return data;
}

std::int64_t RnnClassifier::parameter_count() const {
  std::int64_t total = cell.parameter_count();
  if (bidirectional) total += cell_bwd.parameter_count();
  return total + head_w.size() + head_b.size();
}

RnnClassifier init_model(const CellSpec& spec, Index num_classes, bool bidirectional, Rng& rng,
                         const InitOptions& opts) {
  if (num_classes < 2) throw ShapeError("init_model: need at least 2 classes");
  RnnClassifier model;
  model.spec = spec;
  model.bidirectional = bidirectional;
  model.num_classes = num_classes;
  model.cell = init_cell(spec, rng, opts);
  if (bidirectional) model.cell_bwd = init_cell(spec, rng, opts);
  const Index feat = spec.hidden_size * (bidirectional ? 2 : 1);
  model.head_w = uniform_matrix(num_classes, feat, std::sqrt(6.0 / double(num_classes + feat)), rng);
  model.head_b = Vecd::Zero(num_classes);
  return model;
}

Gradients zero_gradients(const RnnClassifier& model) {
  Gradients g;
  g.cell = zeros_like_cell(model.cell);
  if (model.bidirectional) g.cell_bwd = zeros_like_cell(model.cell_bwd);
  g.head_w = Matd::Zero(model.head_w.rows(), model.head_w.cols());
  g.head_b = Vecd::Zero(model.head_b.size());
  return g;
}

namespace {

std::vector<TensorView> views_impl(CellParams& cell, CellParams& cell_bwd, Matd& head_w,
                                   Vecd& head_b, bool bidirectional) {
  std::vector<TensorView> out;
  collect_tensors(cell, "cell.", out);
  if (bidirectional) collect_tensors(cell_bwd, "cell_bwd.", out);
  out.push_back({"head.w", head_w.data(), head_w.size()});
  out.push_back({"head.b", head_b.data(), head_b.size()});
  return out;
}

}  // namespace

std::vector<TensorView> parameter_views(RnnClassifier& model) {
  return views_impl(model.cell, model.cell_bwd, model.head_w, model.head_b, model.bidirectional);
}

std::vector<TensorView> parameter_views(Gradients& grads, const RnnClassifier& model) {
  return views_impl(grads.cell, grads.cell_bwd, grads.head_w, grads.head_b, model.bidirectional);
}

namespace {

// Backward through the stacked pre-activation: accumulates operator and bias
// gradients for input u and stacked gradient gz; returns dL/du.
Vecd preactivation_backward(const CellSpec& spec, const CellParams& params, const Vecd& u,
                            const Vecd& gz, CellParams& grads) {
  Vecd gu = Vecd::Zero(u.size());
  if (spec.per_gate) {
    const Index m = spec.hidden_size;
    for (Index g = 0; g < gate_count(spec.family); ++g)
      gu += params.ops[g].apply_backward(u, gz.segment(g * m, m), grads.ops[g]);
  } else {
    gu = params.ops[0].apply_backward(u, gz, grads.ops[0]);
  }
  if (params.bias.size() > 0) grads.bias += gz;
  return gu;
}

Vecd concat(const Vecd& a, const Vecd& b) {
  Vecd u(a.size() + b.size());
  u << a, b;
  return u;
}

struct StepGrads {
  Vecd gh_prev;
  Vecd gc_prev;
  Vecd gx;
};

StepGrads rnn_step_backward(const CellSpec& spec, const CellParams& params, const StepCache& c,
                            const Vecd& gh, CellParams& grads) {
  const Index n = spec.input_size;
  Vecd gz = gh.cwiseProduct((1.0 - c.h_new.array().square()).matrix());
  Vecd gu = preactivation_backward(spec, params, concat(c.x, c.h_prev), gz, grads);
  return {gu.tail(spec.hidden_size), {}, gu.head(n)};
}

StepGrads lstm_step_backward(const CellSpec& spec, const CellParams& params, const StepCache& c,
                             const Vecd& gh, const Vecd& gc_in, CellParams& grads) {
  const Index m = spec.hidden_size, n = spec.input_size;
  const auto i = c.gates.segment(0, m), f = c.gates.segment(m, m);
  const auto g = c.gates.segment(2 * m, m), o = c.gates.segment(3 * m, m);
  Vecd tc = c.c_new.array().tanh().matrix();
  Vecd gc = gc_in + gh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
  Vecd gz(4 * m);
  gz.segment(0, m) = gc.cwiseProduct(g).cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
  gz.segment(m, m) =
      gc.cwiseProduct(c.c_prev).cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
  gz.segment(2 * m, m) = gc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
  gz.segment(3 * m, m) =
      gh.cwiseProduct(tc).cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());
  Vecd gu = preactivation_backward(spec, params, concat(c.x, c.h_prev), gz, grads);
  return {gu.tail(m), gc.cwiseProduct(f), gu.head(n)};
}

StepGrads gru_step_backward(const CellSpec& spec, const CellParams& params, const StepCache& c,
                            const Vecd& gh, CellParams& grads) {
  const Index m = spec.hidden_size, n = spec.input_size;
  const auto r = c.gates.segment(0, m), zg = c.gates.segment(m, m);
  const Vecd& cand = c.candidate;
  Vecd gzg = gh.cwiseProduct(c.h_prev - cand).cwiseProduct(zg).cwiseProduct(
      (1.0 - zg.array()).matrix());
  Vecd gn = gh.cwiseProduct((1.0 - zg.array()).matrix());
  Vecd gz_n = gn.cwiseProduct((1.0 - cand.array().square()).matrix());
  Vecd gh_prev = gh.cwiseProduct(zg);

  Vecd u2 = concat(c.x, Vecd(r.cwiseProduct(c.h_prev)));
  Vecd gu2;
  if (spec.per_gate) {
    gu2 = params.ops[2].apply_backward(u2, gz_n, grads.ops[2]);
    if (params.bias.size() > 0) grads.bias.segment(2 * m, m) += gz_n;
  } else {
    Vecd gz2 = Vecd::Zero(3 * m);
    gz2.segment(2 * m, m) = gz_n;
    gu2 = params.ops[0].apply_backward(u2, gz2, grads.ops[0]);
    if (params.bias.size() > 0) grads.bias += gz2;
  }
  Vecd grh = gu2.tail(m);
  Vecd gr = grh.cwiseProduct(c.h_prev);
  gh_prev += grh.cwiseProduct(r);
  Vecd gx = gu2.head(n);

  Vecd gz_r = gr.cwiseProduct(r).cwiseProduct((1.0 - r.array()).matrix());
  Vecd u1 = concat(c.x, c.h_prev);
  Vecd gu1;
  if (spec.per_gate) {
    gu1 = params.ops[0].apply_backward(u1, gz_r, grads.ops[0]);
    gu1 += params.ops[1].apply_backward(u1, gzg, grads.ops[1]);
    if (params.bias.size() > 0) {
      grads.bias.segment(0, m) += gz_r;
      grads.bias.segment(m, m) += gzg;
    }
  } else {
    Vecd gz1 = Vecd::Zero(3 * m);
    gz1.segment(0, m) = gz_r;
    gz1.segment(m, m) = gzg;
    gu1 = params.ops[0].apply_backward(u1, gz1, grads.ops[0]);
    if (params.bias.size() > 0) grads.bias += gz1;
  }
  gh_prev += gu1.tail(m);
  gx += gu1.head(n);
  return {std::move(gh_prev), {}, std::move(gx)};
}

StepGrads fastrnn_step_backward(const CellSpec& spec, const CellParams& params, const StepCache& c,
                                const Vecd& gh, CellParams& grads) {
  const Index n = spec.input_size;
  const double alpha = sigmoid(params.alpha_raw);
  const double beta = sigmoid(params.beta_raw);
  grads.alpha_raw += gh.dot(c.candidate) * alpha * (1.0 - alpha);
  grads.beta_raw += gh.dot(c.h_prev) * beta * (1.0 - beta);
  Vecd gz = (alpha * gh).cwiseProduct((1.0 - c.candidate.array().square()).matrix());
  Vecd gu = preactivation_backward(spec, params, concat(c.x, c.h_prev), gz, grads);
  Vecd gh_prev = beta * gh + gu.tail(spec.hidden_size);
  return {std::move(gh_prev), {}, gu.head(n)};
}

}  // namespace

void cell_backward(const CellSpec& spec, const CellParams& params, const Trajectory& traj,
                   const std::vector<Vecd>& grad_h, CellParams& grads,
                   std::vector<Vecd>* grad_x) {
  const Index T = static_cast<Index>(traj.states.size()) - 1;
  if (T < 1 || static_cast<Index>(traj.caches.size()) != T)
    throw TrainError("cell_backward: trajectory has no recorded caches");
  if (static_cast<Index>(grad_h.size()) != T)
    throw TrainError("cell_backward: grad_h length != timesteps");
  if (grad_x) grad_x->assign(T, Vecd());
  const Index m = spec.hidden_size;
  Vecd gh_carry = Vecd::Zero(m);
  Vecd gc_carry = Vecd::Zero(m);
  for (Index t = T - 1; t >= 0; --t) {
    Vecd gh = gh_carry;
    if (grad_h[t].size() > 0) {
      if (grad_h[t].size() != m) throw TrainError("cell_backward: grad_h entry length mismatch");
      gh += grad_h[t];
    }
    const StepCache& cache = traj.caches[t];
    StepGrads sg;
    switch (spec.family) {
      case CellFamily::Rnn: sg = rnn_step_backward(spec, params, cache, gh, grads); break;
      case CellFamily::Lstm: sg = lstm_step_backward(spec, params, cache, gh, gc_carry, grads); break;
      case CellFamily::Gru: sg = gru_step_backward(spec, params, cache, gh, grads); break;
      case CellFamily::FastRnn: sg = fastrnn_step_backward(spec, params, cache, gh, grads); break;
    }
    gh_carry = std::move(sg.gh_prev);
    gc_carry = sg.gc_prev.size() > 0 ? std::move(sg.gc_prev) : Vecd::Zero(m);
    if (grad_x) (*grad_x)[t] = std::move(sg.gx);
  }
}

namespace {

Vecd final_features(const RnnClassifier& model, const Sequence& seq, Trajectory* f_out,
                    Trajectory* b_out, bool record) {
  if (model.bidirectional) {
    Trajectory f, b;
    bidirectional_forward(model.spec, model.cell, model.cell_bwd, seq.xs, &f, &b, record);
    Vecd feat(2 * model.spec.hidden_size);
    feat << f.final_state().h, b.final_state().h;
    if (f_out) *f_out = std::move(f);
    if (b_out) *b_out = std::move(b);
    return feat;
  }
  Trajectory f = sequence_forward(model.spec, model.cell, seq.xs, record);
  Vecd feat = f.final_state().h;
  if (f_out) *f_out = std::move(f);
  return feat;
}

// log-sum-exp softmax; returns loss and writes p
double softmax_ce(const Vecd& logits, int label, Vecd& p) {
  const double mx = logits.maxCoeff();
  Vecd e = (logits.array() - mx).exp().matrix();
  const double z = e.sum();
  p = e / z;
  return std::log(z) + mx - logits[label];
}

}  // namespace

int predict(const RnnClassifier& model, const Sequence& seq) {
  Vecd feat = final_features(model, seq, nullptr, nullptr, false);
  Vecd logits = model.head_w * feat + model.head_b;
  Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

double evaluate_loss(const RnnClassifier& model, const Dataset& data) {
  if (data.empty()) throw SizeError("evaluate_loss: empty dataset");
  double total = 0.0;
  Vecd p;
  for (const Sequence& seq : data) {
    Vecd feat = final_features(model, seq, nullptr, nullptr, false);
    Vecd logits = model.head_w * feat + model.head_b;
    total += softmax_ce(logits, seq.label, p);
  }
  return total / static_cast<double>(data.size());
}

double evaluate_accuracy(const RnnClassifier& model, const Dataset& data) {
  if (data.empty()) throw SizeError("evaluate_accuracy: empty dataset");
  Index correct = 0;
  for (const Sequence& seq : data)
    if (predict(model, seq) == seq.label) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

double loss_and_gradients(const RnnClassifier& model, const Dataset& batch, Gradients& grads) {
  if (batch.empty()) throw SizeError("loss_and_gradients: empty batch");
  const Index m = model.spec.hidden_size;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  Vecd p;
  for (const Sequence& seq : batch) {
    if (seq.label < 0 || seq.label >= model.num_classes)
      throw TrainError("loss_and_gradients: label out of range");
    Trajectory f, b;
    Vecd feat = final_features(model, seq, &f, &b, true);
    Vecd logits = model.head_w * feat + model.head_b;
    total += softmax_ce(logits, seq.label, p);
    Vecd glogits = p * inv;
    glogits[seq.label] -= inv;
    grads.head_w.noalias() += glogits * feat.transpose();
    grads.head_b += glogits;
    Vecd gfeat = model.head_w.transpose() * glogits;

    const Index T = static_cast<Index>(seq.xs.size());
    std::vector<Vecd> gh(T);
    gh[T - 1] = gfeat.head(m);
    cell_backward(model.spec, model.cell, f, gh, grads.cell);
    if (model.bidirectional) {
      std::vector<Vecd> ghb(T);
      ghb[T - 1] = gfeat.tail(m);  // reversed sequence's last step
      cell_backward(model.spec, model.cell_bwd, b, ghb, grads.cell_bwd);
    }
  }
  return total * inv;
}

double clip_gradients(Gradients& grads, const RnnClassifier& model, double max_norm) {
  if (max_norm <= 0.0) throw TrainError("clip_gradients: max_norm must be > 0");
  auto views = parameter_views(grads, model);
  double sq = 0.0;
  for (const auto& v : views)
    for (Index i = 0; i < v.size; ++i) sq += v.data[i] * v.data[i];
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& v : views)
      for (Index i = 0; i < v.size; ++i) v.data[i] *= scale;
  }
  return norm;
}

OptimizerState init_optimizer_state(const RnnClassifier& model) {
  OptimizerState s;
  s.m = zero_gradients(model);
  s.v = zero_gradients(model);
  return s;
}

void optimizer_step(RnnClassifier& model, Gradients& grads, OptimizerState& state,
                    const TrainConfig& config) {
  auto pv = parameter_views(model);
  auto gv = parameter_views(grads, model);
  for (std::size_t b = 0; b < gv.size(); ++b)
    for (Index i = 0; i < gv[b].size; ++i)
      if (!std::isfinite(gv[b].data[i]))
        throw TrainError("optimizer_step: non-finite gradient in block " + gv[b].name);

  if (config.optimizer == TrainConfig::Optimizer::Sgd) {
    for (std::size_t b = 0; b < pv.size(); ++b)
      for (Index i = 0; i < pv[b].size; ++i)
        pv[b].data[i] -= config.learning_rate * gv[b].data[i];
    ++state.step;
    return;
  }

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  auto mv = parameter_views(state.m, model);
  auto vv = parameter_views(state.v, model);
  for (std::size_t b = 0; b < pv.size(); ++b) {
    for (Index i = 0; i < pv[b].size; ++i) {
      const double g = gv[b].data[i];
      double& m1 = mv[b].data[i];
      double& m2 = vv[b].data[i];
      m1 = beta1 * m1 + (1.0 - beta1) * g;
      m2 = beta2 * m2 + (1.0 - beta2) * g * g;
      pv[b].data[i] -= config.learning_rate * (m1 / bc1) / (std::sqrt(m2 / bc2) + eps);
    }
  }
}

namespace {

struct SparseTrainState {
  bool active = false;
  PruneSchedule schedule;
  std::vector<Matd> masks;  // one per op, aligned with dense-trained ops
};

void apply_masks(CellParams& cell, const SparseTrainState& st) {
  for (std::size_t i = 0; i < st.masks.size(); ++i)
    cell.ops[i].dense_weight() = cell.ops[i].dense_weight().cwiseProduct(st.masks[i]);
}

void refresh_masks(CellParams& cell, SparseTrainState& st, double sparsity) {
  for (std::size_t i = 0; i < st.masks.size(); ++i)
    st.masks[i] = magnitude_mask(cell.ops[i].dense_weight(), sparsity);
  apply_masks(cell, st);
}

}  // namespace

TrainResult train_model(const CellSpec& spec, Index num_classes, bool bidirectional,
                        const Dataset& dataset, const TrainConfig& config) {
  if (dataset.empty()) throw TrainError("train_model: empty dataset");
  for (const Sequence& s : dataset) {
    if (s.xs.empty()) throw TrainError("train_model: empty sequence in dataset");
    for (const Vecd& x : s.xs)
      if (x.size() != spec.input_size)
        throw TrainError("train_model: sequence feature width != input_size");
    if (s.label < 0 || s.label >= num_classes)
      throw TrainError("train_model: label out of range");
  }
  if (config.epochs < 0 || config.batch_size < 1)
    throw TrainError("train_model: bad epochs/batch_size");

  Rng rng(config.seed);
  InitOptions init_opts;
  init_opts.lowrank_budget = config.lowrank_budget;
  init_opts.sparsity = config.target_sparsity;

  // Sparse models are trained as masked dense weights (gradual magnitude
  // pruning), then converted to CSR at the end.
  const bool sparse_kind = spec.kind == OperatorKind::Sparse;
  CellSpec train_spec = spec;
  if (sparse_kind) train_spec.kind = OperatorKind::Dense;

  RnnClassifier model = init_model(train_spec, num_classes, bidirectional, rng, init_opts);
  model.spec = train_spec;

  SparseTrainState prune;
  double final_sparsity = config.target_sparsity;
  if (sparse_kind) {
    if (final_sparsity < 0.0) {
      const Index rows = spec.per_gate ? spec.hidden_size : spec.stacked_rows();
      const double kron_cost =
          static_cast<double>(plan_factor_shapes(rows, spec.concat_size()).cost);
      final_sparsity = std::clamp(
          1.0 - kron_cost / (static_cast<double>(rows) * spec.concat_size()), 0.0, 0.99);
    }
    const std::int64_t steps_per_epoch =
        (static_cast<std::int64_t>(dataset.size()) + config.batch_size - 1) / config.batch_size;
    const std::int64_t total_steps = std::max<std::int64_t>(1, steps_per_epoch * config.epochs);
    prune.active = true;
    prune.schedule.start_step = 0;
    prune.schedule.end_step = std::max<std::int64_t>(1, total_steps / 2);
    prune.schedule.final_sparsity = final_sparsity;
    prune.schedule.interval = std::max<std::int64_t>(1, total_steps / 20);
    prune.masks.assign(model.cell.ops.size(), Matd());
    for (std::size_t i = 0; i < model.cell.ops.size(); ++i)
      prune.masks[i] = Matd::Ones(model.cell.ops[i].rows(), model.cell.ops[i].cols());
    if (bidirectional)
      throw TrainError("train_model: sparse training with bidirectional cells not supported");
  }

  OptimizerState opt = init_optimizer_state(model);
  TrainResult result;
  auto record_epoch = [&](Index epoch) {
    EpochMetrics em;
    em.epoch = epoch;
    Index correct = 0;
    Vecd p;
    for (const Sequence& seq : dataset) {
      Vecd feat = final_features(model, seq, nullptr, nullptr, false);
      Vecd logits = model.head_w * feat + model.head_b;
      em.loss += softmax_ce(logits, seq.label, p);
      Index best = 0;
      logits.maxCoeff(&best);
      if (static_cast<int>(best) == seq.label) ++correct;
    }
    em.loss /= static_cast<double>(dataset.size());
    em.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(dataset.size());
    result.metrics.push_back(em);
  };
  record_epoch(0);
  RnnClassifier checkpoint = model;

  std::vector<Index> order(dataset.size());
  std::iota(order.begin(), order.end(), Index(0));
  std::int64_t step = 0;

  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      Dataset batch;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k)
        batch.push_back(dataset[order[k]]);
      Gradients grads = zero_gradients(model);
      const double loss = loss_and_gradients(model, batch, grads);
      if (!std::isfinite(loss)) {
        result.diverged = true;
        result.note = "loss diverged (non-finite) at epoch " + std::to_string(epoch) +
                      "; returning last end-of-epoch checkpoint";
        result.model = std::move(checkpoint);
        return result;
      }
      clip_gradients(grads, model, config.clip_norm);
      optimizer_step(model, grads, opt, config);
      ++step;
      if (prune.active) {
        const std::int64_t since = step - prune.schedule.start_step;
        if (step >= prune.schedule.start_step &&
            (since % prune.schedule.interval == 0 || step >= prune.schedule.end_step))
          refresh_masks(model.cell, prune, schedule_sparsity(prune.schedule, step));
        else
          apply_masks(model.cell, prune);
      }
    }
    record_epoch(epoch);
    checkpoint = model;
  }

  if (prune.active) {
    refresh_masks(model.cell, prune, final_sparsity);
    for (auto& op : model.cell.ops)
      op = LinearOperator::sparse(SparseCSRd::from_dense(op.dense_weight()));
    model.spec.kind = OperatorKind::Sparse;
    // final metrics entry reflects the CSR model
    result.metrics.back().loss = evaluate_loss(model, dataset);
    result.metrics.back().accuracy = evaluate_accuracy(model, dataset);
  }

  result.model = std::move(model);
  return result;
}

FdReport finite_diff_check(RnnClassifier& model, const Dataset& batch, std::uint64_t seed) {
  Gradients grads = zero_gradients(model);
  loss_and_gradients(model, batch, grads);
  auto pv = parameter_views(model);
  auto gv = parameter_views(grads, model);
  Rng rng(seed ^ 0x5deece66dULL);
  const double h = 1e-6;
  FdReport report;
  for (std::size_t b = 0; b < pv.size(); ++b) {
    FdBlockReport block;
    block.name = pv[b].name;
    std::vector<Index> coords(pv[b].size);
    std::iota(coords.begin(), coords.end(), Index(0));
    if (coords.size() > 200) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(200);
    }
    for (Index i : coords) {
      double& p = pv[b].data[i];
      const double saved = p;
      p = saved + h;
      const double lp = evaluate_loss(model, batch);
      p = saved - h;
      const double lm = evaluate_loss(model, batch);
      p = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = gv[b].data[i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
      block.max_rel_error = std::max(block.max_rel_error, rel);
      ++block.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace kpc

#pragma once

// Reverse-mode gradients through cells and time, optimizers, finite
// difference verification, and the desk-scale training loop for sequence
// classification (affine + softmax head on the final hidden state).

#include "kpc/baselines.hpp"
#include "kpc/cells.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace kpc {

struct Sequence {
  std::vector<Vecd> xs;
  int label = 0;
};
using Dataset = std::vector<Sequence>;

// 2-class task: class c has mean (c ? -1 : +1)*0.3 on every feature at every
// timestep plus uniform(-0.2, 0.2) noise.  Separable for every operator kind
// down to rank-1.
Dataset make_separable_dataset(Index n_sequences, Index timesteps, Index features,
                               std::uint64_t seed);

struct RnnClassifier {
  CellSpec spec;
  bool bidirectional = false;
  Index num_classes = 0;
  CellParams cell;
  CellParams cell_bwd;  // used iff bidirectional
  Matd head_w;          // num_classes x (m or 2m)
  Vecd head_b;

  std::int64_t parameter_count() const;
};

RnnClassifier init_model(const CellSpec& spec, Index num_classes, bool bidirectional, Rng& rng,
                         const InitOptions& opts = {});

struct Gradients {
  CellParams cell;
  CellParams cell_bwd;
  Matd head_w;
  Vecd head_b;
};
Gradients zero_gradients(const RnnClassifier& model);

std::vector<TensorView> parameter_views(RnnClassifier& model);
std::vector<TensorView> parameter_views(Gradients& grads, const RnnClassifier& model);

// BPTT.  grad_h[t] is dL/dh_t after step t (zero vectors allowed); requires
// a trajectory recorded with caches.  Optionally returns dL/dx_t.
void cell_backward(const CellSpec& spec, const CellParams& params, const Trajectory& traj,
                   const std::vector<Vecd>& grad_h, CellParams& grads,
                   std::vector<Vecd>* grad_x = nullptr);

// Mean softmax cross-entropy over the batch; accumulates into grads.
double loss_and_gradients(const RnnClassifier& model, const Dataset& batch, Gradients& grads);
double evaluate_loss(const RnnClassifier& model, const Dataset& data);   // mean CE
double evaluate_accuracy(const RnnClassifier& model, const Dataset& data);
int predict(const RnnClassifier& model, const Sequence& seq);

// Returns the pre-clip global norm; scales gradients down when above.
double clip_gradients(Gradients& grads, const RnnClassifier& model, double max_norm);

struct TrainConfig {
  enum class Optimizer { Sgd, Adam };
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  Index batch_size = 16;
  Index epochs = 50;
  Index bptt_len = 0;  // carried in configs; training always runs
                       // full-sequence BPTT at desk scale
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  // schedule for sparse-kind training (gradual magnitude pruning)
  double target_sparsity = -1.0;  // <0 = compression-matched default
  std::int64_t lowrank_budget = 0;
};

struct OptimizerState {
  std::int64_t step = 0;
  Gradients m;  // first moment (Adam)
  Gradients v;  // second moment (Adam)
};
OptimizerState init_optimizer_state(const RnnClassifier& model);

// SGD: p -= lr*g.  Adam: bias-corrected, beta1 0.9, beta2 0.999, eps 1e-8.
// Throws TrainError (with the block name) on non-finite gradients.
void optimizer_step(RnnClassifier& model, Gradients& grads, OptimizerState& state,
                    const TrainConfig& config);

struct EpochMetrics {
  Index epoch = 0;  // 0 = initialization
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  RnnClassifier model;
  std::vector<EpochMetrics> metrics;  // entry per epoch, incl. epoch 0
  bool diverged = false;              // loss went non-finite; model is the
  std::string note;                   // last end-of-epoch checkpoint
};

// Deterministic under fixed config.seed.  Sparse-kind models are trained as
// masked dense with the mask tightened on a cubic schedule, then converted
// to CSR.  A non-finite epoch loss stops training and returns the last
// end-of-epoch checkpoint with `diverged` set.
TrainResult train_model(const CellSpec& spec, Index num_classes, bool bidirectional,
                        const Dataset& dataset, const TrainConfig& config);

struct FdBlockReport {
  std::string name;
  double max_rel_error = 0.0;
  Index checked = 0;
};
struct FdReport {
  std::vector<FdBlockReport> blocks;
  double max_rel_error = 0.0;
  bool pass(double tolerance) const { return max_rel_error <= tolerance; }
};

// Central differences (h=1e-6) on <= 200 sampled coordinates per block.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-3) so that
// near-zero coordinates are judged on an absolute scale.
FdReport finite_diff_check(RnnClassifier& model, const Dataset& batch, std::uint64_t seed = 0);

}  // namespace kpc

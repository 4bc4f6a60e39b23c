#pragma once

// RNN / LSTM / GRU / FastRNN cells over an abstract weight operator.  Each
// cell owns one operator over the stacked gate matrix (gates*m) x (n+m), or
// one operator per gate block when per_gate is set.

#include "kpc/operator.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kpc {

enum class CellFamily { Rnn, Lstm, Gru, FastRnn };
enum class OperatorKind { Dense, Kron, LowRank, Sparse };

Index gate_count(CellFamily family);  // 1, 4, 3, 1
const char* family_name(CellFamily family);
const char* operator_kind_name(OperatorKind kind);
CellFamily parse_family(const std::string& s);
OperatorKind parse_operator_kind(const std::string& s);

struct CellSpec {
  CellFamily family = CellFamily::Rnn;
  Index input_size = 0;   // n
  Index hidden_size = 0;  // m
  OperatorKind kind = OperatorKind::Dense;
  bool bias = true;
  bool per_gate = false;

  Index concat_size() const { return input_size + hidden_size; }
  Index stacked_rows() const { return gate_count(family) * hidden_size; }
};

struct CellParams {
  std::vector<LinearOperator> ops;  // 1 stacked op, or gate_count per-gate ops
  Vecd bias;                        // stacked_rows entries; empty when bias disabled
  bool use_scalars = false;         // FastRnn mixing scalars below
  double alpha_raw = 0.0;           // update weight  = sigmoid(alpha_raw)
  double beta_raw = 0.0;            // carry weight   = sigmoid(beta_raw)

  std::int64_t weight_parameter_count() const;  // operators only
  std::int64_t parameter_count() const;         // + bias + scalars
};

struct InitOptions {
  std::int64_t lowrank_budget = 0;  // parameters for U,V; 0 = planned-Kron cost
  double sparsity = -1.0;           // fraction pruned; <0 = match planned-Kron cost
};

// Glorot-scaled init; LSTM forget bias 1.0; FastRnn scalars start at
// sigmoid ~0.05 / ~0.95.
CellParams init_cell(const CellSpec& spec, Rng& rng, const InitOptions& opts = {});
CellParams zeros_like_cell(const CellParams& params);

// Total parameters of the dense cell with this spec's family/sizes/bias
// (weights + biases + FastRnn scalars); used for budget matching.
std::int64_t dense_cell_parameter_count(const CellSpec& spec);

struct CellState {
  Vecd h;
  Vecd c;  // Lstm only; empty otherwise
};
CellState initial_state(const CellSpec& spec);

// What the backward pass needs from one step.  Field use by family:
//   Rnn:     gates unused, candidate = h_new (tanh output)
//   Lstm:    gates = [i;f;g;o] post-activation, c_prev/c_new set
//   Gru:     gates = [r;z] post-activation, candidate = n (tanh output)
//   FastRnn: candidate = h_tilde
struct StepCache {
  Vecd x, h_prev;
  Vecd c_prev, c_new;
  Vecd gates;
  Vecd candidate;
  Vecd h_new;
};

Vecd rnn_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
              const Eigen::Ref<const Vecd>& h, StepCache* cache = nullptr);
CellState lstm_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
                    const CellState& state, StepCache* cache = nullptr);
Vecd gru_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
              const Eigen::Ref<const Vecd>& h, StepCache* cache = nullptr);
Vecd fastrnn_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
                  const Eigen::Ref<const Vecd>& h, StepCache* cache = nullptr);

CellState cell_step(const CellSpec& spec, const CellParams& params, const Eigen::Ref<const Vecd>& x,
                    const CellState& state, StepCache* cache = nullptr);

struct Trajectory {
  std::vector<CellState> states;  // size T+1; states[0] = zeros
  std::vector<StepCache> caches;  // size T when recorded, else empty
  const CellState& final_state() const { return states.back(); }
};

Trajectory sequence_forward(const CellSpec& spec, const CellParams& params,
                            const std::vector<Vecd>& xs, bool record = false);

// Per-step [h_fwd_t ; h_bwd_t]; the backward cell consumes the reversed
// sequence, and its state at reversed step k is aligned to original step
// T-1-k.  Optionally exposes both trajectories for BPTT.
std::vector<Vecd> bidirectional_forward(const CellSpec& spec, const CellParams& fwd,
                                        const CellParams& bwd, const std::vector<Vecd>& xs,
                                        Trajectory* fwd_traj = nullptr,
                                        Trajectory* bwd_traj = nullptr, bool record = false);

inline double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Named views over every parameter tensor, in a fixed order (operators,
// bias, scalars).  Used by optimizers, clipping, and finite differences.
struct TensorView {
  std::string name;
  double* data = nullptr;
  Index size = 0;
};

void collect_tensors(CellParams& params, const std::string& prefix, std::vector<TensorView>& out);

}  // namespace kpc

#pragma once

// Spectral diagnostics of realized weight matrices: numerical rank, largest
// singular value, condition number; plus per-factor reports and the
// amplification bound ||A x||_2 <= sigma_max ||x||_2.

#include "kpc/operator.hpp"

#include <optional>
#include <string>

namespace kpc {

struct SpectralReport {
  Index rows = 0;
  Index cols = 0;
  Index numerical_rank = 0;       // count of sigma_i > tolerance
  double sigma_max = 0.0;
  double sigma_min_nonzero = 0.0; // smallest singular value above tolerance
  double condition = 0.0;         // sigma_max / sigma_min_nonzero
  bool condition_defined = false; // false for the zero matrix
  double tolerance = 0.0;         // eps * sigma_max * max(rows, cols)

  std::string to_json_line(const std::string& label = "") const;
};

// Full SVD; tolerance = machine epsilon * sigma_max * max(m, n).
SpectralReport svd_metrics(const Matd& W);

struct OperatorSpectra {
  SpectralReport combined;  // of the materialization
  std::optional<SpectralReport> factor1, factor2;  // Kron only
  // Kron only: relative gap of the multiplicative identities
  std::optional<double> sigma_product_rel_err;
  std::optional<double> cond_product_rel_err;
  std::optional<bool> rank_multiplicative;
};

// Materializes the operator; for Kron additionally reports both factors and
// checks rank/sigma/cond multiplicativity.
OperatorSpectra analyze_operator(const LinearOperator& op);

struct AmplificationCheck {
  double sigma_max = 0.0;
  double observed_max = 0.0;  // max ||op.apply(x)||_2 over random unit x
  double gap = 0.0;           // sigma_max - observed_max
  Index trials = 0;
  bool bound_holds = false;   // observed <= sigma_max * (1 + 1e-10)
};

AmplificationCheck amplification_bound_check(const LinearOperator& op, Index trials, Rng& rng);

}  // namespace kpc

#include "kpc/analysis.hpp"

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

namespace kpc {

std::string SpectralReport::to_json_line(const std::string& label) const {
  nlohmann::json j;
  if (!label.empty()) j["label"] = label;
  j["rows"] = rows;
  j["cols"] = cols;
  j["numerical_rank"] = numerical_rank;
  j["sigma_max"] = sigma_max;
  j["sigma_min_nonzero"] = sigma_min_nonzero;
  if (condition_defined)
    j["condition"] = condition;
  else
    j["condition"] = nullptr;
  j["tolerance"] = tolerance;
  return j.dump();
}

SpectralReport svd_metrics(const Matd& W) {
  if (W.size() == 0) throw ShapeError("svd_metrics: empty matrix");
  if (!W.allFinite()) throw ShapeError("svd_metrics: non-finite entries");
  SpectralReport r;
  r.rows = W.rows();
  r.cols = W.cols();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(W);
  const auto& sv = svd.singularValues();
  r.sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  r.tolerance = std::numeric_limits<double>::epsilon() * r.sigma_max *
                static_cast<double>(std::max(r.rows, r.cols));
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > r.tolerance) {
      ++r.numerical_rank;
      r.sigma_min_nonzero = sv(i);  // values are descending
    }
  }
  if (r.numerical_rank > 0) {
    r.condition = r.sigma_max / r.sigma_min_nonzero;
    r.condition_defined = true;
  }
  return r;
}

OperatorSpectra analyze_operator(const LinearOperator& op) {
  OperatorSpectra out;
  out.combined = svd_metrics(op.materialize());
  if (op.kind() == LinearOperator::Kind::Kron) {
    const KroneckerPaird& p = op.kron_pair();
    out.factor1 = svd_metrics(p.B);
    out.factor2 = svd_metrics(p.C);
    const double sig_prod = out.factor1->sigma_max * out.factor2->sigma_max;
    out.sigma_product_rel_err =
        std::abs(out.combined.sigma_max - sig_prod) / std::max(1e-300, sig_prod);
    out.rank_multiplicative =
        out.combined.numerical_rank == out.factor1->numerical_rank * out.factor2->numerical_rank;
    if (out.factor1->condition_defined && out.factor2->condition_defined &&
        out.combined.condition_defined) {
      const double cond_prod = out.factor1->condition * out.factor2->condition;
      out.cond_product_rel_err =
          std::abs(out.combined.condition - cond_prod) / std::max(1e-300, cond_prod);
    }
  }
  return out;
}

AmplificationCheck amplification_bound_check(const LinearOperator& op, Index trials, Rng& rng) {
  if (trials < 1) throw SizeError("amplification_bound_check: trials must be >= 1");
  AmplificationCheck chk;
  chk.trials = trials;
  chk.sigma_max = svd_metrics(op.materialize()).sigma_max;
  for (Index t = 0; t < trials; ++t) {
    Vecd x = gaussian_vector(op.cols(), 1.0, rng);
    const double nx = x.norm();
    if (nx == 0.0) continue;
    x /= nx;
    chk.observed_max = std::max(chk.observed_max, op.apply(x).norm());
  }
  chk.gap = chk.sigma_max - chk.observed_max;
  chk.bound_holds = chk.observed_max <= chk.sigma_max * (1.0 + 1e-10);
  return chk;
}

}  // namespace kpc

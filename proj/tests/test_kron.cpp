#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kpc/kron.hpp"

#include <cmath>

using namespace kpc;

namespace {

double rel_inf(const Vecd& got, const Vecd& want) {
  const double scale = std::max(1e-300, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

Index dim(Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

TEST_CASE("kp_expand frozen 2x2 (x) 2x2") {
  Matd B(2, 2), C(2, 2);
  B << 1, 2, 3, 4;
  C << 0, 1, 1, 0;
  const Matd A = kp_expand<double>(KroneckerPaird{B, C});
  Matd want(4, 4);
  want << 0, 1, 0, 2,
          1, 0, 2, 0,
          0, 3, 0, 4,
          3, 0, 4, 0;
  CHECK(A == want);
}

TEST_CASE("kp_expand shape law and entry formula") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const Index m1 = dim(rng, 1, 6), n1 = dim(rng, 1, 6);
    const Index m2 = dim(rng, 1, 6), n2 = dim(rng, 1, 6);
    const Matd B = uniform_matrix(m1, n1, 1.0, rng);
    const Matd C = uniform_matrix(m2, n2, 1.0, rng);
    const Matd A = kp_expand<double>(B, C);
    REQUIRE(A.rows() == m1 * m2);
    REQUIRE(A.cols() == n1 * n2);
    // A[i1*m2+i2, j1*n2+j2] = B(i1,j1) * C(i2,j2)
    for (Index i1 = 0; i1 < m1; ++i1)
      for (Index j1 = 0; j1 < n1; ++j1)
        CHECK(A(i1 * m2 + (m2 - 1), j1 * n2) == B(i1, j1) * C(m2 - 1, 0));
  }
  CHECK_THROWS_AS(kp_expand<double>(Matd(), Matd::Ones(2, 2)), ShapeError);
}

TEST_CASE("kp_matvec equals expand-then-multiply, dims <= 64") {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    const Index m1 = dim(rng, 1, 8), n1 = dim(rng, 1, 8);
    const Index m2 = dim(rng, 1, 8), n2 = dim(rng, 1, 8);
    const KroneckerPaird p{uniform_matrix(m1, n1, 1.0, rng), uniform_matrix(m2, n2, 1.0, rng)};
    const Vecd x = uniform_vector(n1 * n2, 1.0, rng);
    const Vecd want = kp_expand<double>(p) * x;
    CHECK(rel_inf(kp_matvec<double>(p, x), want) <= 1e-10);
  }
}

TEST_CASE("kp_matvec rejects wrong input length") {
  const KroneckerPaird p{Matd::Ones(2, 3), Matd::Ones(2, 2)};
  CHECK_THROWS_AS(kp_matvec<double>(p, Vecd(Vecd::Ones(5))), ShapeError);
  CHECK_NOTHROW(kp_matvec<double>(p, Vecd(Vecd::Ones(6))));
}

TEST_CASE("chain: fold order, pair equivalence, identity chain") {
  Rng rng(13);
  // two-factor chain == the pair kernel
  const KroneckerPaird p{uniform_matrix(3, 4, 1.0, rng), uniform_matrix(2, 5, 1.0, rng)};
  KroneckerChaind two;
  two.factors = {p.B, p.C};
  const Vecd x = uniform_vector(20, 1.0, rng);
  CHECK(rel_inf(kp_matvec_chain<double>(two, x), kp_matvec<double>(p, x)) <= 1e-12);
  CHECK((kp_expand_chain<double>(two) - kp_expand<double>(p)).cwiseAbs().maxCoeff() == 0.0);

  // right fold: F1 (x) (F2 (x) F3)
  KroneckerChaind three;
  three.factors = {uniform_matrix(2, 2, 1.0, rng), uniform_matrix(3, 2, 1.0, rng),
                   uniform_matrix(2, 3, 1.0, rng)};
  const Matd want = kp_expand<double>(three.factors[0], kp_expand<double>(three.factors[1], three.factors[2]));
  CHECK((kp_expand_chain<double>(three) - want).cwiseAbs().maxCoeff() == 0.0);

  // eight 2x2 identities expand to the 256x256 identity
  KroneckerChaind id;
  for (int i = 0; i < 8; ++i) id.factors.push_back(Matd::Identity(2, 2));
  CHECK(id.rows() == 256);
  const Vecd v = uniform_vector(256, 1.0, rng);
  CHECK(rel_inf(kp_matvec_chain<double>(id, v), v) == 0.0);

  KroneckerChaind empty;
  CHECK_THROWS_AS(kp_expand_chain<double>(empty), ShapeError);
  CHECK_THROWS_AS(kp_matvec_chain<double>(empty, v), ShapeError);
}

TEST_CASE("chain workspace overload matches the allocating path") {
  Rng rng(17);
  KpChainWorkspaced ws;
  for (int t = 0; t < 20; ++t) {
    KroneckerChaind chain;
    const int k = 2 + static_cast<int>(rng() % 4);
    for (int i = 0; i < k; ++i)
      chain.factors.push_back(uniform_matrix(dim(rng, 1, 4), dim(rng, 1, 4), 1.0, rng));
    const Vecd x = uniform_vector(chain.cols(), 1.0, rng);
    const Vecd want = kp_matvec_chain<double>(chain, x);
    // same workspace reused across different chain shapes on purpose
    CHECK(rel_inf(kp_matvec_chain<double>(chain, x, ws), want) == 0.0);
  }
  KroneckerChaind c;
  c.factors = {Matd::Ones(2, 2)};
  CHECK_THROWS_AS(kp_matvec_chain<double>(c, Vecd(Vecd::Ones(3)), ws), ShapeError);
}

TEST_CASE("154x164 via 11x41 (x) 14x4") {
  const KroneckerPaird p{Matd::Ones(11, 41), Matd::Ones(14, 4)};
  CHECK(p.rows() == 154);
  CHECK(p.cols() == 164);
}

TEST_CASE("kp_matvec_grad: identity passes the loss gradient through") {
  const Matd B = Matd::Identity(3, 3), C = Matd::Identity(4, 4);
  Rng rng(5);
  const Vecd x = uniform_vector(12, 1.0, rng);
  for (Index k = 0; k < 12; ++k) {
    Vecd e = Vecd::Zero(12);
    e[k] = 1.0;  // loss = y . e_k
    const auto g = kp_matvec_grad<double>(B, C, x, e);
    CHECK(rel_inf(g.grad_x, e) == 0.0);
  }
}

TEST_CASE("kp_matvec_grad: zero C kills grad_B") {
  Rng rng(6);
  const Matd B = uniform_matrix(3, 2, 1.0, rng);
  const Matd C = Matd::Zero(2, 5);
  const auto g = kp_matvec_grad<double>(B, C, Vecd(uniform_vector(10, 1.0, rng)),
                                Vecd(uniform_vector(6, 1.0, rng)));
  CHECK(g.grad_B.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kp_matvec_grad matches central finite differences on 3x2 (x) 2x5") {
  Rng rng(21);
  Matd B = uniform_matrix(3, 2, 1.0, rng);
  Matd C = uniform_matrix(2, 5, 1.0, rng);
  Vecd x = uniform_vector(10, 1.0, rng);
  const Vecd g_y = uniform_vector(6, 1.0, rng);
  const auto g = kp_matvec_grad<double>(B, C, x, g_y);

  const double h = 1e-6;
  auto loss = [&]() { return g_y.dot(kp_matvec<double>(KroneckerPaird{B, C}, x)); };
  auto check_coord = [&](double* p, double analytic) {
    const double keep = *p;
    *p = keep + h;
    const double up = loss();
    *p = keep - h;
    const double dn = loss();
    *p = keep;
    const double numeric = (up - dn) / (2.0 * h);
    CHECK(std::abs(analytic - numeric) <=
          1e-5 * std::max({std::abs(analytic), std::abs(numeric), 1e-3}));
  };
  for (Index i = 0; i < B.size(); ++i) check_coord(B.data() + i, g.grad_B.data()[i]);
  for (Index i = 0; i < C.size(); ++i) check_coord(C.data() + i, g.grad_C.data()[i]);
  for (Index i = 0; i < x.size(); ++i) check_coord(x.data() + i, g.grad_x.data()[i]);
}

TEST_CASE("kp_matvec_grad: directional derivative identity vs dense gradient") {
  // <g_B, dB> + <g_C, dC> == <g_dense, dB (x) C + B (x) dC>
  Rng rng(23);
  for (int t = 0; t < 100; ++t) {
    const Index m1 = dim(rng, 1, 4), n1 = dim(rng, 1, 4);
    const Index m2 = dim(rng, 1, 4), n2 = dim(rng, 1, 4);
    const Matd B = uniform_matrix(m1, n1, 1.0, rng), C = uniform_matrix(m2, n2, 1.0, rng);
    const Vecd x = uniform_vector(n1 * n2, 1.0, rng);
    const Vecd g_y = uniform_vector(m1 * m2, 1.0, rng);
    const auto g = kp_matvec_grad<double>(B, C, x, g_y);
    const Matd g_dense = g_y * x.transpose();  // dL/dA for y = A x
    const Matd dB = uniform_matrix(m1, n1, 1.0, rng), dC = uniform_matrix(m2, n2, 1.0, rng);
    const double lhs = (g.grad_B.array() * dB.array()).sum() +
                       (g.grad_C.array() * dC.array()).sum();
    const double rhs =
        (g_dense.array() * (kp_expand<double>(dB, C) + kp_expand<double>(B, dC)).array()).sum();
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("grad shape validation") {
  const Matd B = Matd::Ones(2, 3), C = Matd::Ones(2, 2);
  CHECK_THROWS_AS(kp_matvec_grad<double>(B, C, Vecd(Vecd::Ones(5)), Vecd(Vecd::Ones(4))), ShapeError);
  CHECK_THROWS_AS(kp_matvec_grad<double>(B, C, Vecd(Vecd::Ones(6)), Vecd(Vecd::Ones(3))), ShapeError);
}

TEST_CASE("flop counters") {
  CHECK(dense_matvec_flops(154, 164) == 154 * 164);
  CHECK(kp_matvec_flops(11, 41, 14, 4) == 14 * 4 * 41 + 11 * 41 * 14);

  // equality exactly when m1 = n2 = 2; strict win once (m1-1)(n2-1) > 1
  CHECK(kp_matvec_flops(2, 5, 7, 2) == dense_matvec_flops(2 * 7, 5 * 2));
  Rng rng(29);
  for (int t = 0; t < 200; ++t) {
    const Index m1 = dim(rng, 2, 9), n1 = dim(rng, 2, 9);
    const Index m2 = dim(rng, 2, 9), n2 = dim(rng, 2, 9);
    const auto kp = kp_matvec_flops(m1, n1, m2, n2);
    const auto dense = dense_matvec_flops(m1 * m2, n1 * n2);
    CHECK(kp <= dense);
    if ((m1 - 1) * (n2 - 1) > 1) CHECK(kp < dense);
  }

  // suffix expansion areas + final matvec; frozen for the all-2x2 chain
  CHECK(kp_chain_expand_flops({{2, 2}, {2, 2}}) == 16 + 16);
  std::vector<std::pair<Index, Index>> all2(8, {2, 2});
  CHECK(kp_chain_expand_flops(all2) ==
        16 + 64 + 256 + 1024 + 4096 + 16384 + 65536 + 65536);
}

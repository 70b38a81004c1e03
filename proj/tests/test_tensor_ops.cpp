#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tpr/objective.hpp"
#include "tpr/tensor_ops.hpp"

using namespace tpr;

namespace {

RealVectorXd random_point(Index dim, std::uint64_t seed, double scale = 1.0) {
  GaussianStream rng(seed);
  RealVectorXd x(dim);
  for (Index k = 0; k < dim; ++k) x[k] = scale * rng.normal();
  return x;
}

Rank1Probe<double> random_probe(Index dim, std::uint64_t seed) {
  Rank1Probe<double> p;
  for (int s = 0; s < 4; ++s) p[s] = random_point(dim, derive_seed(seed, s));
  return p;
}

std::array<oracle::Vec, 4> as_array(const Rank1Probe<double>& p) { return {p[0], p[1], p[2], p[3]}; }

}  // namespace

TEST_CASE("T contraction matches the materialized tensor") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index n = 1 + Index(seed % 3);
    const auto ens = sample_ensemble(n, 7, seed);
    const auto T = oracle::dense_T(ens.plus(), ens.c());
    for (int k = 0; k < 5; ++k) {
      const auto p = random_probe(2 * n, derive_seed(seed, 10 + k));
      const double want = oracle::contract(T, p[0], p[1], p[2], p[3]);
      CHECK(oracle::rel_err(t_contract(ens, p), want, 1e-300) < 1e-10);
    }
  }
}

TEST_CASE("S contraction matches the materialized tensor") {
  for (int d = 2; d <= 6; d += 2) {
    const auto S = oracle::dense_S(d);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = random_probe(d, seed);
      CHECK(oracle::rel_err(s_contract(p), oracle::contract(S, p[0], p[1], p[2], p[3]), 1e-300) < 1e-10);
    }
  }
}

TEST_CASE("S takes the value 3 on a repeated unit vector") {
  const RealVectorXd u = random_point(6, 5).normalized();
  CHECK(s_contract(u, u, u, u) == doctest::Approx(3.0));
}

TEST_CASE("one-slot contraction of T - S matches the materialized tensor") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index n = 1 + Index(seed % 3);
    const auto ens = sample_ensemble(n, 9, seed + 40);
    const auto D = oracle::difference(oracle::dense_T(ens.plus(), ens.c()), oracle::dense_S(int(2 * n)));
    const auto p = random_probe(2 * n, seed);
    for (int slot = 0; slot < 4; ++slot) {
      const oracle::Vec want = oracle::partial(D, slot, as_array(p));
      CHECK(oracle::rel_err(diff_partial_contract(ens, slot, p), want, 1e-300) < 1e-10);
    }
    // Any slot's partial dotted with that slot's vector is the full contraction.
    const MomentGap<double> gap(ens);
    CHECK(gap.partial(p, 2).dot(p[2]) == doctest::Approx(gap.contract(p)).epsilon(1e-12));
  }
  const auto ens = sample_ensemble(1, 3, 1);
  CHECK_THROWS_AS(diff_partial_contract(ens, 4, random_probe(2, 0)), std::out_of_range);
}

TEST_CASE("loss equals c <T, U(x)> for the ten-term U") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = sample_instance(1 + Index(seed % 4), 4 + Index(2 * seed), seed);
    for (int k = 0; k < 10; ++k) {
      const RealVectorXd x = random_point(inst.ensemble.embed_dim(), derive_seed(seed, k));
      const double f = f_value(inst, x);
      CHECK(std::abs(f - f_via_tensor(inst, x)) / std::max(1.0, f) < 1e-9);
    }
  }
}

TEST_CASE("U(x) materialized and contracted with T reproduces the loss") {
  const auto inst = sample_instance(1, 6, 3);
  const RealVectorXd x = random_point(2, 44);
  const auto T = oracle::dense_T(inst.ensemble.plus(), inst.ensemble.c());
  double total = 0;
  for (const auto& term : u_tensor_terms(x, inst.gt_plus))
    total += term.weight() * oracle::contract(T, term.v1, term.v1, term.v2, term.v2);
  const double f = f_value(inst, x);
  CHECK(std::abs(inst.ensemble.c() * total - f) / std::max(1.0, f) < 1e-10);
}

TEST_CASE("U(x) term weights") {
  const RealVectorXd x = random_point(4, 1);
  const RealVectorXd g = random_point(4, 2);
  const auto terms = u_tensor_terms(x, g);
  const double want[10] = {1, 1, 1, 1, 2, 2, -2, -2, -2, -2};
  for (int k = 0; k < 10; ++k) CHECK(terms[std::size_t(k)].weight() == want[k]);
}

TEST_CASE("surrogate equals c <S, U(x)>") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index d = 2 * (1 + Index(seed % 4));
    const RealVectorXd x = random_point(d, seed, 1.5);
    const RealVectorXd g = random_point(d, seed + 1000);
    const double c = 1.0 + double(seed % 7);
    const double gv = g_value(x, g, c);
    CHECK(std::abs(gv - g_via_tensor(x, g, c)) / std::max(1.0, std::abs(gv)) < 1e-10);
  }
}

TEST_CASE("S-only operator norm recovers 3") {
  for (Index d : {2, 4, 8}) {
    const auto est = opnorm_estimate(MomentGap<double>::s_only(d), OpNormOptions{20, 200, 1e-12, 0});
    CHECK(est.value == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(est.probe.is_unit(1e-10));
    CHECK(est.restarts_used == 20);
  }
}

TEST_CASE("zero ensemble gives a zero T part") {
  const SensingEnsemble<double> ens(DenseMatrixXd::Zero(3, 4), 1.0);
  const auto p = random_probe(4, 8);
  CHECK(t_contract(ens, p) == 0.0);
  const auto est = opnorm_estimate(ens, OpNormOptions{5, 200, 1e-12, 1});
  CHECK(est.value == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("operator norm estimate is deterministic and bounded below by any probe") {
  const auto ens = sample_ensemble(2, 300, 17);
  const OpNormOptions opts{8, 200, 1e-8, 123};
  const auto a = opnorm_estimate(ens, opts);
  const auto b = opnorm_estimate(ens, opts);
  CHECK(a.value == b.value);
  CHECK(a.iterations == b.iterations);
  const MomentGap<double> gap(ens);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = random_unit_probe<double>(4, s);
    CHECK(std::abs(gap.contract(p)) <= a.value + 1e-12);
  }
  CHECK(a.probe.is_unit(1e-10));
  CHECK(std::abs(std::abs(gap.contract(a.probe)) - a.value) < 1e-12);
}

TEST_CASE("single ascent run never decreases the value") {
  const auto ens = sample_ensemble(2, 50, 3);
  const MomentGap<double> gap(ens);
  const auto start = random_unit_probe<double>(4, 77);
  const double initial = std::abs(gap.contract(start));
  double last = initial;
  for (int iters = 1; iters <= 6; ++iters) {
    const auto est = maximize_from(gap, start, iters, 0.0);
    CHECK(est.value >= last - 1e-12);
    last = est.value;
  }
}

TEST_CASE("more restarts never lower the estimate") {
  const auto ens = sample_ensemble(1, 200, 21);
  const MomentGap<double> gap(ens);
  std::vector<std::uint64_t> seeds;
  double previous = 0;
  for (int r = 0; r < 10; ++r) {
    seeds.push_back(restart_seed(5, r));
    const auto est = opnorm_estimate_with_seeds(gap, std::span<const std::uint64_t>(seeds), 200, 1e-10);
    CHECK(est.value >= previous);
    previous = est.value;
  }
  CHECK_THROWS_AS(opnorm_estimate(gap, OpNormOptions{0, 10, 1e-8, 0}), std::invalid_argument);
}

TEST_CASE("probe unit check") {
  auto p = random_unit_probe<double>(4, 1);
  CHECK(p.is_unit());
  p[1] *= 2.0;
  CHECK_FALSE(p.is_unit());
}

TEST_CASE("single basis vector with unit scale") {
  const SensingEnsemble<double> ens(RealVectorXd::Unit(2, 0).transpose().eval(), 1.0);
  REQUIRE(ens.c() == 1.0);
  const RealVectorXd e1 = RealVectorXd::Unit(2, 0);
  const RealVectorXd e2 = RealVectorXd::Unit(2, 1);
  CHECK(t_contract(ens, e1, e1, e1, e1) == 1.0);
  CHECK(t_contract(ens, e2, e2, e2, e2) == 0.0);
  CHECK(t_contract(ens, e1, e1, e1, e2) == 0.0);
}

TEST_CASE("S on basis pairs and on repeated pairs") {
  const RealVectorXd e1 = RealVectorXd::Unit(4, 0);
  const RealVectorXd e2 = RealVectorXd::Unit(4, 1);
  CHECK(s_contract(e1, e1, e2, e2) == 1.0);
  CHECK(s_contract(e1, e2, e1, e2) == 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RealVectorXd u = random_point(6, seed);
    const RealVectorXd v = random_point(6, seed + 100);
    const double want = u.squaredNorm() * v.squaredNorm() + 2 * std::pow(u.dot(v), 2);
    CHECK(s_contract(u, u, v, v) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("U(x) weights sum to zero") {
  const auto terms = u_tensor_terms(random_point(4, 3), random_point(4, 4));
  double total = 0;
  for (const auto& t : terms) total += t.weight();
  CHECK(total == 0.0);
}

TEST_CASE("tensor forms at the origin") {
  const auto inst = sample_instance(2, 9, 31);
  const RealVectorXd zero = RealVectorXd::Zero(4);
  CHECK(f_via_tensor(inst, zero) == doctest::Approx(inst.measurements.squaredNorm()).epsilon(1e-12));
  const RealVectorXd g = random_point(4, 32);
  const double c = 2.5;
  CHECK(g_via_tensor(zero, g, c) == doctest::Approx(8 * c * std::pow(g.squaredNorm(), 2)).epsilon(1e-12));
}

TEST_CASE("contractions are multilinear and permutation symmetric") {
  const auto ens = sample_ensemble(2, 11, 41);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = random_probe(4, derive_seed(41, seed));
    const RealVectorXd w = random_point(4, derive_seed(42, seed));
    const double a = 0.7, b = -1.3;
    for (int slot = 0; slot < 4; ++slot) {
      auto pu = p, pw = p, pm = p;
      pw[slot] = w;
      pm[slot] = a * p[slot] + b * w;
      CHECK(t_contract(ens, pm) == doctest::Approx(a * t_contract(ens, pu) + b * t_contract(ens, pw)).epsilon(1e-10));
      CHECK(s_contract(pm) == doctest::Approx(a * s_contract(pu) + b * s_contract(pw)).epsilon(1e-10));
    }
    std::array<int, 4> perm{0, 1, 2, 3};
    const double t0 = t_contract(ens, p), s0 = s_contract(p);
    while (std::next_permutation(perm.begin(), perm.end())) {
      Rank1Probe<double> q;
      for (int k = 0; k < 4; ++k) q[k] = p[perm[std::size_t(k)]];
      CHECK(t_contract(ens, q) == doctest::Approx(t0).epsilon(1e-12));
      CHECK(s_contract(q) == doctest::Approx(s0).epsilon(1e-12));
    }
  }
}

TEST_CASE("empty ensemble partial is minus three times the unit vector") {
  const RealVectorXd u = random_point(6, 51).normalized();
  Rank1Probe<double> p;
  for (int s = 0; s < 4; ++s) p[s] = u;
  const auto gap = MomentGap<double>::s_only(6);
  CHECK(gap.partial(p, 0).isApprox(-3.0 * u, 1e-14));
}

TEST_CASE("estimate is invariant to sensing-vector signs and restart order") {
  const auto ens = sample_ensemble(2, 200, 61);
  const OpNormOptions opt{8, 200, 1e-12, 3};
  const auto base = opnorm_estimate(ens, opt);
  const SensingEnsemble<double> flipped(-ens.plus(), ens.sigma());
  CHECK(opnorm_estimate(flipped, opt).value == doctest::Approx(base.value).epsilon(1e-10));

  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < 8; ++r) seeds.push_back(restart_seed(3, r));
  std::reverse(seeds.begin(), seeds.end());
  const auto reversed = opnorm_estimate_with_seeds(MomentGap<double>(ens), std::span<const std::uint64_t>(seeds), 200, 1e-12);
  CHECK(reversed.value == doctest::Approx(base.value).epsilon(1e-12));
}

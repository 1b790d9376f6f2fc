#include "gpdv/errors.hpp"
#include "gpdv/kernel.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace gpdv;

namespace {

Eigen::RowVectorXd pt(std::initializer_list<double> v) {
  Eigen::RowVectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double e : v) x(k++) = e;
  return x;
}

const KernelFamily kFamilies[] = {KernelFamily::SquaredExponential, KernelFamily::Matern32,
                                  KernelFamily::Matern52};

}  // namespace

TEST_CASE("squared exponential reference values") {
  const KernelSpec k{KernelFamily::SquaredExponential, 1.0, 1.0, 0.0};
  CHECK(eval_kernel(k, pt({0.3, -1.2}), pt({0.3, -1.2})) == 1.0);
  // Frozen from an independent scalar evaluation of exp(-1/2).
  CHECK(eval_kernel(k, pt({0.0}), pt({1.0})) == doctest::Approx(0.6065306597126334).epsilon(1e-14));
  CHECK(eval_kernel(k, pt({0.0}), pt({1.0})) == doctest::Approx(oracle::se(1.0, 1.0, 1.0)));
}

TEST_CASE("matern reference values") {
  KernelSpec k{KernelFamily::Matern52, 1.0, 1.0, 0.0};
  CHECK(eval_kernel(k, pt({0.0, 0.0}), pt({0.6, 0.8})) ==
        doctest::Approx(0.5239941088318203).epsilon(1e-14));
  k.family = KernelFamily::Matern32;
  CHECK(eval_kernel(k, pt({2.0}), pt({1.0})) == doctest::Approx(0.4833577245965077).epsilon(1e-14));
}

TEST_CASE("kernel matches scalar oracle, is symmetric and bounded by the variance") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (KernelFamily fam : kFamilies) {
    for (int trial = 0; trial < 200; ++trial) {
      const KernelSpec k{fam, u(rng), u(rng), 0.0};
      const auto pts = oracle::random_points(rng, 2, 3);
      const double kxy = eval_kernel(k, pts.row(0), pts.row(1));
      CHECK(kxy == doctest::Approx(oracle::kernel(k, pts.row(0), pts.row(1))).epsilon(1e-13));
      CHECK(kxy == eval_kernel(k, pts.row(1), pts.row(0)));
      CHECK(std::abs(kxy) <= k.variance);
      CHECK(eval_kernel(k, pts.row(0), pts.row(0)) == k.variance);
    }
  }
}

TEST_CASE("matern kernels are continuous in the distance") {
  for (KernelFamily fam : {KernelFamily::Matern32, KernelFamily::Matern52}) {
    const KernelSpec k{fam, 0.7, 1.3, 0.0};
    double worst = 0.0;
    for (double r = 0.0; r < 5.0; r += 0.01) {
      worst = std::max(worst, std::abs(kernel_of_distance(k, r) - kernel_of_distance(k, r + 1e-7)));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("dimension mismatch is an input error") {
  const KernelSpec k;
  CHECK_THROWS_AS(eval_kernel(k, pt({0.0}), pt({0.0, 1.0})), InputError);
  const TrendBasis t{TrendFamily::Linear, 2};
  CHECK_THROWS_AS(eval_basis(t, pt({1.0})), InputError);
}

TEST_CASE("invalid hyperparameters are rejected") {
  CHECK_THROWS_AS((KernelSpec{KernelFamily::Matern52, 0.0, 1.0, 0.0}.validate()), InputError);
  CHECK_THROWS_AS((KernelSpec{KernelFamily::Matern52, 1.0, -1.0, 0.0}.validate()), InputError);
  CHECK_THROWS_AS((KernelSpec{KernelFamily::Matern52, 1.0, 1.0, -1e-3}.validate()), InputError);
  CHECK_NOTHROW((KernelSpec{KernelFamily::Matern52, 1.0, 1.0, 0.0}.validate()));
}

TEST_CASE("gram applies the nugget by index") {
  const KernelSpec k{KernelFamily::SquaredExponential, 1.0, 1.0, 0.01};
  PointSet two(2, 1);
  two << 0.5, 0.5;
  const Eigen::MatrixXd g = gram(k, two);
  CHECK(g(0, 0) == doctest::Approx(1.01));
  CHECK(g(1, 1) == doctest::Approx(1.01));
  CHECK(g(0, 1) == doctest::Approx(1.0));
  CHECK(g(1, 0) == doctest::Approx(1.0));

  const KernelSpec k2{KernelFamily::Matern32, 2.0, 3.0, 0.5};
  const Eigen::MatrixXd single = gram(k2, PointSet::Constant(1, 4, 0.2));
  CHECK(single.rows() == 1);
  CHECK(single(0, 0) == doctest::Approx(3.5));
}

TEST_CASE("random gram spectrum is floored by the nugget") {
  std::mt19937_64 rng(11);
  for (KernelFamily fam : kFamilies) {
    for (int trial = 0; trial < 20; ++trial) {
      const KernelSpec k{fam, 1.0, 1.0, 0.05};
      const Eigen::MatrixXd g = gram(k, oracle::random_points(rng, 5, 2));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
      CHECK(eig.eigenvalues().minCoeff() >= k.nugget - 1e-10);
      CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("gram with a nugget factorizes up to n = 500") {
  std::mt19937_64 rng(3);
  for (KernelFamily fam : kFamilies) {
    const KernelSpec k{fam, 1.0, 1.0, 1e-4};
    Eigen::LLT<Eigen::MatrixXd> llt(gram(k, oracle::random_points(rng, 500, 2)));
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("trend basis evaluation") {
  const TrendBasis simple{TrendFamily::Simple, 2};
  const TrendBasis ordinary{TrendFamily::Ordinary, 2};
  const TrendBasis linear{TrendFamily::Linear, 2};
  CHECK(eval_basis(simple, pt({2.0, 3.0})).size() == 0);
  CHECK(eval_basis(ordinary, pt({2.0, 3.0})) == Eigen::VectorXd::Ones(1));
  const Eigen::VectorXd f = eval_basis(linear, pt({2.0, 3.0}));
  REQUIRE(f.size() == 3);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == 2.0);
  CHECK(f(2) == 3.0);
  CHECK(simple.size() == 0);
  CHECK(ordinary.size() == 1);
  CHECK(linear.size() == 3);
  CHECK(basis_matrix(linear, PointSet::Zero(4, 2)).cols() == 3);
}

TEST_CASE("family names round trip") {
  for (KernelFamily fam : kFamilies) CHECK(parse_kernel_family(to_string(fam)) == fam);
  for (TrendFamily fam : {TrendFamily::Simple, TrendFamily::Ordinary, TrendFamily::Linear}) {
    CHECK(parse_trend_family(to_string(fam)) == fam);
  }
  CHECK_THROWS_AS(parse_kernel_family("rbf-ish"), InputError);
}

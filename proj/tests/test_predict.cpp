#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "blockgp/gp_full.hpp"
#include "blockgp/predict.hpp"
#include "support.hpp"

using namespace blockgp;
using Catch::Matchers::WithinAbs;

namespace {

using testsupport::BlockedModel;

GpParams params1(double beta, double sigma2, double phi) {
  GpParams p;
  p.beta = Eigen::VectorXd::Constant(1, beta);
  p.sigma2 = sigma2;
  p.phi = RoughnessParams(phi);
  return p;
}

BlockedModel random_model(std::uint64_t seed, int n, int k) {
  Rng rng = Rng::keyed(seed, 0xAB);
  return testsupport::interleaved_model(rng, n, k);
}

BlockedModel contiguous(std::uint64_t seed, int n, int k) {
  Rng rng = Rng::keyed(seed, 0xAC);
  return testsupport::contiguous_model(rng, n, k);
}

using Model = BlockedModel;

}  // namespace

TEST_CASE("lambda_system values") {
  SECTION("k=1: Lambda_11 = lambda_1") {
    const Model m = random_model(1, 12, 1);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    const LambdaSystem sys = lambda_system(cache, Eigen::VectorXd::Constant(1, 3.7));
    REQUIRE_THAT(sys.Lambda(0, 0), WithinAbs(sys.lambda(0), 1e-8));
  }
  SECTION("decorrelated x*: Lambda and lambda vanish") {
    const Model m = random_model(2, 10, 2);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    const LambdaSystem sys = lambda_system(cache, Eigen::VectorXd::Constant(1, 1e6));
    REQUIRE(sys.Lambda.lpNorm<Eigen::Infinity>() < 1e-12);
    REQUIRE(sys.lambda.lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SECTION("3-block case matches independent dense solves") {
    const Model m = random_model(3, 12, 3);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 4.2);
    const LambdaSystem sys = lambda_system(cache, x);
    const double delta = dataset_jitter(m.ds.n());
    std::vector<Eigen::VectorXd> b(3);
    std::vector<Eigen::MatrixXd> Xs(3);
    for (int i = 0; i < 3; ++i) {
      Eigen::MatrixXd X(m.part.blocks[i].size(), 1);
      for (int r = 0; r < X.rows(); ++r) X.row(r) = m.ds.X.row(m.part.blocks[i][r]);
      Xs[i] = X;
      Eigen::MatrixXd K = corr_matrix(X, X, m.params.phi);
      K.diagonal().array() += delta;
      const Eigen::VectorXd a = corr_matrix(x.transpose(), X, m.params.phi).transpose();
      b[i] = K.fullPivLu().solve(a);
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        // diagonal blocks carry the same jitter the solves use
        Eigen::MatrixXd C = corr_matrix(Xs[i], Xs[j], m.params.phi);
        if (i == j) C.diagonal().array() += delta;
        const double want = b[i].dot(C * b[j]);
        REQUIRE_THAT(sys.Lambda(i, j), WithinAbs(want, 1e-10));
      }
    }
  }
}

TEST_CASE("blubp_weights") {
  SECTION("k=1 collapses to the single conditional") {
    const Model m = random_model(5, 10, 1);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    const LambdaSystem sys = lambda_system(cache, Eigen::VectorXd::Constant(1, 2.3));
    const BlubpWeights w = blubp_weights(sys);
    REQUIRE_THAT(w.omega(0), WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(w.varfactor, WithinAbs(1.0 - sys.lambda(0), 1e-9));
  }
  SECTION("x* at a design point gives a unit weight and zero variance") {
    const Model m = random_model(7, 12, 3);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    for (int b = 0; b < 3; ++b) {
      const int row = m.part.blocks[b][0];
      const LambdaSystem sys = lambda_system(cache, m.ds.X.row(row).transpose());
      const BlubpWeights w = blubp_weights(sys);
      REQUIRE((w.omega - Eigen::VectorXd::Unit(3, b)).lpNorm<Eigen::Infinity>() < 1e-6);
      REQUIRE(w.varfactor <= 1e-8);
    }
  }
  SECTION("matches an equality-constrained KKT oracle") {
    // the instance keeps every block inside correlation reach of x* without
    // making the block functionals collinear, so Lambda is well conditioned
    // and the program's solution is unique enough to compare at 1e-8
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
      Rng mrng = Rng::keyed(100 + t, 0xAC);
      const Model m = testsupport::contiguous_model(mrng, 8, 4, 0.55, 0.45);
      const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
      // keep x* off the design points, where Lambda turns singular by design
      double xv = rng.uniform(0, 3.6);
      while ((m.ds.X.array() - xv).abs().minCoeff() < 0.1) xv = rng.uniform(0, 3.6);
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, xv);
      const LambdaSystem sys = lambda_system(cache, x);
      const BlubpWeights w = blubp_weights(sys);
      // KKT system: [2 Lambda, 1; 1', 0] [w; nu] = [2 lambda; 1]
      const int k = sys.k();
      Eigen::MatrixXd A(k + 1, k + 1);
      A.setZero();
      A.topLeftCorner(k, k) = 2.0 * sys.Lambda;
      A.topRightCorner(k, 1).setOnes();
      A.bottomLeftCorner(1, k).setOnes();
      Eigen::VectorXd rhs(k + 1);
      rhs.head(k) = 2.0 * sys.lambda;
      rhs(k) = 1.0;
      const Eigen::VectorXd sol = A.fullPivLu().solve(rhs);
      REQUIRE((w.omega - sol.head(k)).lpNorm<Eigen::Infinity>() < 1e-8);
      const double obj = sol.head(k).dot(sys.Lambda * sol.head(k)) -
                         2.0 * sys.lambda.dot(sol.head(k));
      REQUIRE_THAT(w.varfactor_pre_clamp, WithinAbs(obj + 1.0, 1e-8));
    }
  }
}

TEST_CASE("check_lambda_pd") {
  SECTION("distinct points give a strictly positive eigenvalue") {
    // span stays a few correlation lengths wide; beyond that the
    // cross-correlations underflow and the certificate hits the float floor
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng mrng = Rng::keyed(seed, 0xAC);
      const Model m =
          testsupport::contiguous_model(mrng, 10, 1 + static_cast<int>(seed % 4), 0.5, 0.3);
      const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
      Rng rng = Rng::keyed(seed, 0x33);
      const LambdaSystem sys =
          lambda_system(cache, Eigen::VectorXd::Constant(1, rng.uniform(0, 3.0)));
      REQUIRE(check_lambda_pd(sys) > 0.0);
    }
  }
  SECTION("a point duplicated across blocks degenerates Lambda at that point") {
    Model m = contiguous(3, 8, 2);
    const int a = m.part.blocks[0][0];
    const int b = m.part.blocks[1][0];
    m.ds.X(b, 0) = m.ds.X(a, 0);  // violate the distinct-rows premise
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    const LambdaSystem sys = lambda_system(cache, m.ds.X.row(a).transpose());
    REQUIRE(std::abs(check_lambda_pd(sys)) < 1e-6);
  }
}

TEST_CASE("predict_blubp") {
  SECTION("k=1 equals the dense predictor") {
    const Model m = random_model(11, 20, 1);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    const BlupModel full(m.ds, m.params, BasisSpec::constant());
    Rng rng(13);
    for (int t = 0; t < 50; ++t) {
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, rng.uniform(-2, 22));
      const auto a = predict_blubp(cache, m.params, x);
      const auto b = full.predict(x);
      REQUIRE_THAT(a.mean, WithinAbs(b.mean, 1e-8 * std::max(1.0, std::abs(b.mean))));
      REQUIRE_THAT(a.variance, WithinAbs(b.variance, 1e-8 * std::max(1e-8, b.variance)));
    }
  }
  SECTION("exact hit returns the observation") {
    const Model m = random_model(17, 15, 3);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    for (int i = 0; i < m.ds.n(); ++i) {
      const auto pr = predict_blubp(cache, m.params, m.ds.X.row(i).transpose());
      REQUIRE(pr.exact_hit);
      REQUIRE(pr.mean == m.ds.y(i));
      REQUIRE(pr.variance == 0.0);
    }
  }
  SECTION("continuity approaching a design point") {
    const Model m = random_model(19, 12, 3);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    const double x0 = m.ds.X(4, 0);
    double prev_gap = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
      const auto pr = predict_blubp(cache, m.params, Eigen::VectorXd::Constant(1, x0 + eps));
      REQUIRE(std::isfinite(pr.mean));
      const double gap = std::abs(pr.mean - m.ds.y(4));
      REQUIRE(gap <= prev_gap + 1e-9);
      prev_gap = gap;
    }
    REQUIRE(prev_gap < 1e-6);
  }
}

TEST_CASE("predict_cl") {
  SECTION("k=1 is identical to predict_blubp") {
    const Model m = random_model(23, 10, 1);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    Rng rng(29);
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, rng.uniform(0, 10));
      const auto a = predict_cl(cache, m.params, x);
      const auto b = predict_blubp(cache, m.params, x);
      REQUIRE_THAT(a.mean, WithinAbs(b.mean, 1e-9 * std::max(1.0, std::abs(b.mean))));
    }
  }
  SECTION("mirror-symmetric blocks get equal weights") {
    Dataset ds;
    ds.X.resize(6, 1);
    ds.X << -3, -2, -1, 1, 2, 3;
    ds.y.resize(6);
    ds.y << 0.5, -0.2, 0.9, 0.9, -0.2, 0.5;  // symmetric responses
    Partition part;
    part.blocks = {{0, 1, 2}, {3, 4, 5}};
    const GpParams p = params1(0, 1, 1);
    const BlockCache cache(ds, part, p.phi, BasisSpec::constant());
    const auto pr = predict_cl(cache, p, Eigen::VectorXd::Zero(1));
    REQUIRE(pr.weights.has_value());
    REQUIRE_THAT((*pr.weights)(0), WithinAbs(0.5, 1e-10));
    REQUIRE_THAT((*pr.weights)(1), WithinAbs(0.5, 1e-10));
  }
  SECTION("prior weights are validated") {
    const Model m = random_model(31, 8, 2);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    Eigen::VectorXd bad(2);
    bad << 0.8, 0.1;
    REQUIRE_THROWS_AS(predict_cl(cache, m.params, Eigen::VectorXd::Zero(1), bad),
                      std::invalid_argument);
  }
  SECTION("CL variance is never below the optimal block variance") {
    Rng rng(37);
    for (int t = 0; t < 200; ++t) {
      const Model m = random_model(400 + t, 12, 3);
      const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, rng.uniform(0, 12));
      const auto cl = predict_cl(cache, m.params, x);
      const auto bb = predict_blubp(cache, m.params, x);
      if (cl.fallback) continue;
      REQUIRE(cl.variance >= bb.variance - 1e-10);
    }
  }
}

TEST_CASE("variance ordering: BLUP <= BLUBP <= CL (Monte Carlo free)") {
  Rng rng(41);
  for (int t = 0; t < 100; ++t) {
    const Model m = random_model(700 + t, 15, 3);
    const BlockCache cache(m.ds, m.part, m.params.phi, BasisSpec::constant());
    const BlupModel full(m.ds, m.params, BasisSpec::constant());
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, rng.uniform(0, 15));
    const auto a = full.predict(x);
    const auto b = predict_blubp(cache, m.params, x);
    const auto c = predict_cl(cache, m.params, x);
    REQUIRE(a.variance <= b.variance + 1e-10);
    if (!c.fallback) REQUIRE(b.variance <= c.variance + 2e-10);
  }
}

TEST_CASE("unbiasedness of the block predictor (Monte Carlo)") {
  // fixed design, resampled responses; the mean prediction error at a fixed
  // x* is within 4 standard errors of 0
  const Model base = random_model(43, 10, 2);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 4.6);
  Eigen::MatrixXd joint(11, 1);
  joint.topRows(10) = base.ds.X;
  joint.row(10) = x.transpose();
  const int N = 10000;
  double acc = 0.0, acc2 = 0.0;
  for (int r = 0; r < N; ++r) {
    const Eigen::VectorXd ys = sample_gp(joint, base.params, BasisSpec::constant(), 9000 + r);
    Dataset ds = base.ds;
    ds.y = ys.head(10);
    const BlockCache cache(ds, base.part, base.params.phi, BasisSpec::constant());
    const double err = predict_blubp(cache, base.params, x).mean - ys(10);
    acc += err;
    acc2 += err * err;
  }
  const double mean_err = acc / N;
  const double se = std::sqrt((acc2 / N - mean_err * mean_err) / N);
  REQUIRE(std::abs(mean_err) < 4 * se);
}

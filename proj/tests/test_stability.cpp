#include "ptctc/errors.hpp"
#include "ptctc/stability.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace ptctc;
using namespace ptctc::stability;
using meanfield::MeanFieldModel;

namespace {

// Distance between two unordered eigenvalue pairs.
double pair_distance(const std::array<Complex, 2>& a, const std::array<Complex, 2>& b) {
  return std::min(std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1])),
                  std::max(std::abs(a[0] - b[1]), std::abs(a[1] - b[0])));
}

std::vector<FixedPoint> select(const std::vector<FixedPoint>& fps, bool symmetric) {
  std::vector<FixedPoint> out;
  for (const auto& fp : fps) {
    if (fp.pt_symmetric == symmetric) out.push_back(fp);
  }
  return out;
}

}  // namespace

TEST_CASE("canonical 2x2 classifications") {
  Eigen::Matrix2d j;
  j << 0, -1, 1, 0;
  auto c = classify_fixed_point(j);
  CHECK(c.kind == Kind::Center);
  CHECK(pair_distance(c.eigenvalues, {Complex(0, 1), Complex(0, -1)}) < 1e-15);
  REQUIRE(c.alpha.has_value());
  CHECK(*c.alpha == -1.0);
  CHECK(*c.beta == 1.0);

  j << 0, 1, 1, 0;
  c = classify_fixed_point(j);
  CHECK(c.kind == Kind::Saddle);
  CHECK(pair_distance(c.eigenvalues, {Complex(1), Complex(-1)}) < 1e-15);

  c = classify_fixed_point(Eigen::Matrix2d::Zero());
  CHECK(c.kind == Kind::Degenerate);

  j << -1, 3, 0, -2;
  CHECK(classify_fixed_point(j).kind == Kind::Stable);
  j << 1, 3, -4, 0.5;
  CHECK(classify_fixed_point(j).kind == Kind::Unstable);
}

TEST_CASE("eigenvectors are unit and satisfy the eigen equation") {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    Eigen::Matrix2d j;
    j << u(rng), u(rng), u(rng), u(rng);
    const auto ev = eigenvalues_2x2(j);
    const auto vecs = eigenvectors_2x2(j);
    for (int k = 0; k < 2; ++k) {
      CHECK(std::abs(vecs[k].norm() - 1.0) < 1e-12);
      CHECK((j.cast<Complex>() * vecs[k] - ev[k] * vecs[k]).norm() < 1e-10);
    }
  }
}

TEST_CASE("CEP metric on canonical matrices") {
  Eigen::Matrix2d jordan;
  jordan << 0, 1, 0, 0;
  const auto defective = cep_metric(jordan);
  CHECK(defective.metric == doctest::Approx(1.0));
  CHECK(defective.cep);
  CHECK_FALSE(defective.degenerate);

  Eigen::Matrix2d rotation;
  rotation << 0, -1, 1, 0;
  const auto normal = cep_metric(rotation);
  CHECK(normal.metric < 1e-12);
  CHECK_FALSE(normal.cep);

  const auto zero = cep_metric(Eigen::Matrix2d::Zero());
  CHECK(zero.degenerate);
  CHECK_FALSE(zero.cep);
}

TEST_CASE("DDM fixed-point inventory") {
  CHECK(find_fixed_points(MeanFieldModel::ddm(2.0, 1.0, 1.0)).size() == 2);
  const auto fps = find_fixed_points(MeanFieldModel::ddm(2.0, 1.0, 1.9));
  CHECK(fps.size() == 4);
  CHECK(select(fps, true).size() == 2);
  CHECK(select(fps, false).size() == 2);
  for (const auto& fp : fps) CHECK(fp.residual < 1e-10);
}

TEST_CASE("LMG fixed-point inventory") {
  const auto fps = find_fixed_points(MeanFieldModel::lmg(1.0, 0.8));
  CHECK(fps.size() == 6);
  CHECK(select(fps, true).size() == 4);
  CHECK(select(fps, false).size() == 2);
}

TEST_CASE("fixed-point sets are closed under parity") {
  std::vector<MeanFieldModel> models = {
      MeanFieldModel::ddm(2.0, 1.0, 1.9), MeanFieldModel::ddm(2.0, 0.4, 2.6),
      MeanFieldModel::lmg(1.0, 0.8), MeanFieldModel::lmg(1.0, 1.2),
      MeanFieldModel::waveguide(1.0, 0.3, 0.5), MeanFieldModel::lattice(1.0, 0.5, 1.0, 1),
      MeanFieldModel::lattice(1.0, 0.5, 2.5, 2)};
  for (const auto& model : models) {
    const auto fps = find_fixed_points(model);
    REQUIRE_FALSE(fps.empty());
    for (const auto& fp : fps) {
      CHECK(model.rhs(fp.coords).norm() < 1e-10);
      const meanfield::State image = model.parity() * fp.coords;
      const bool found = std::any_of(fps.begin(), fps.end(), [&](const FixedPoint& other) {
        return (other.coords - image).norm() < 1e-9;
      });
      CHECK(found);
    }
  }
}

TEST_CASE("DDM PT-symmetric spectra follow the closed form") {
  const double g = 2.0, omega = 1.0;
  for (const double kappa : {0.0, 0.5, 1.0, 1.5, 1.7}) {
    const double r = std::sqrt(g * g - kappa * kappa);
    const Complex lo = 2.0 * std::pow(r, 0.5) * std::sqrt(Complex(r - omega));
    const Complex hi = 2.0 * std::pow(r, 0.5) * std::sqrt(Complex(r + omega));
    const auto model = MeanFieldModel::ddm(g, omega, kappa);
    const auto fps = select(find_fixed_points(model), true);
    REQUIRE(fps.size() == 2);
    std::vector<double> seen;
    for (const auto& fp : fps) {
      const auto report = analyze_fixed_point(model, fp);
      CHECK(std::abs(report.jacobian.matrix(0, 0)) < 1e-12);
      CHECK(std::abs(report.jacobian.matrix(1, 1)) < 1e-12);
      const auto& ev = report.classification.eigenvalues;
      const double d_lo = pair_distance(ev, {kI * lo, -kI * lo});
      const double d_hi = pair_distance(ev, {kI * hi, -kI * hi});
      CAPTURE(kappa);
      CHECK(std::min(d_lo, d_hi) < 1e-8);
      seen.push_back(d_lo < d_hi ? 0.0 : 1.0);
    }
    CHECK(seen[0] != seen[1]);
  }
}

TEST_CASE("DDM PT-broken spectra and stability") {
  const double g = 2.0, omega = 1.0;
  for (const double kappa : {1.8, 1.9, 2.5, 3.0}) {
    const auto model = MeanFieldModel::ddm(g, omega, kappa);
    const auto broken = select(find_fixed_points(model), false);
    REQUIRE(broken.size() == 2);
    const double mz_abs = std::sqrt((kappa * kappa - (g * g - omega * omega)) / (kappa * kappa + omega * omega));
    for (const auto& fp : broken) {
      const double mz = fp.coords(2);
      CHECK(std::abs(std::abs(mz) - mz_abs) < 1e-10);
      const auto report = analyze_fixed_point(model, fp);
      const std::array<Complex, 2> expected{2.0 * Complex(kappa, omega) * mz,
                                            2.0 * Complex(kappa, -omega) * mz};
      CHECK(pair_distance(report.classification.eigenvalues, expected) < 1e-8);
      if (mz > 0) CHECK(report.classification.kind == Kind::Unstable);
      if (mz < 0 && kappa > std::sqrt(g * g - omega * omega)) {
        CHECK(report.classification.kind == Kind::Stable);
      }
    }
  }
}

TEST_CASE("broken-pair analysis") {
  const auto pairs = pt_broken_pair_analysis(MeanFieldModel::ddm(2.0, 1.0, 2.5));
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].first.fixed_point.coords(2) > 0.0);
  CHECK(pairs[0].first.classification.kind == Kind::Unstable);
  CHECK(pairs[0].second.classification.kind == Kind::Stable);
  CHECK(pairs[0].stable_unstable);
  CHECK(pairs[0].physical);
  CHECK_THROWS_AS(pt_broken_pair_analysis(MeanFieldModel::ddm(2.0, 1.0, 1.0)), DomainError);
}

TEST_CASE("LMG broken points at the poles") {
  auto south = [](const MeanFieldModel& model) {
    for (const auto& fp : find_fixed_points(model)) {
      if (fp.coords(2) < -0.999) return analyze_fixed_point(model, fp);
    }
    FAIL("south pole missing");
    return StabilityReport{};
  };
  const auto stable = south(MeanFieldModel::lmg(1.0, 1.5));
  CHECK(pair_distance(stable.classification.eigenvalues, {Complex(-5.0), Complex(-1.0)}) < 1e-8);
  CHECK(stable.classification.kind == Kind::Stable);
  const auto unstable = south(MeanFieldModel::lmg(1.0, 0.5));
  const double largest = std::max(unstable.classification.eigenvalues[0].real(),
                                  unstable.classification.eigenvalues[1].real());
  CHECK(largest == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(unstable.classification.kind != Kind::Stable);
}

TEST_CASE("LMG transition is degenerate, not a CEP") {
  const auto model = MeanFieldModel::lmg(1.0, 1.0);
  const auto fps = select(find_fixed_points(model), true);
  REQUIRE_FALSE(fps.empty());
  for (const auto& fp : fps) {
    const auto report = analyze_fixed_point(model, fp);
    REQUIRE(report.classification.alpha.has_value());
    CHECK(std::abs(*report.classification.alpha) < 1e-6);
    CHECK(std::abs(*report.classification.beta) < 1e-6);
    CHECK(report.cep.degenerate);
    CHECK_FALSE(report.cep.cep);
  }
}

TEST_CASE("Standard chart refuses its pole and Auto chart handles it") {
  const auto model = MeanFieldModel::lmg(1.0, 1.5);
  CHECK_THROWS_AS(reduced_jacobian(model, meanfield::State(0, 0, -1)), ChartError);
  const auto j = reduced_jacobian(model, meanfield::State(0, 0, -1), Method::Analytic, Chart::Auto);
  CHECK(j.coordinates == std::array<int, 2>{0, 1});
}

TEST_CASE("analytic and finite-difference reduced Jacobians agree") {
  std::vector<MeanFieldModel> models = {
      MeanFieldModel::ddm(2.0, 1.0, 1.2), MeanFieldModel::ddm(2.0, 1.0, 1.9),
      MeanFieldModel::ddm(1.5, 0.3, 2.2), MeanFieldModel::lmg(1.0, 0.7),
      MeanFieldModel::lmg(1.0, 1.4), MeanFieldModel::waveguide(1.0, 0.3, 0.5),
      MeanFieldModel::lattice(1.0, 0.5, 1.0, 1)};
  for (const auto& model : models) {
    for (const auto& fp : find_fixed_points(model)) {
      for (const Chart chart : {Chart::Standard, Chart::Auto}) {
        try {
          const auto a = reduced_jacobian(model, fp.coords, Method::Analytic, chart);
          const auto f = reduced_jacobian(model, fp.coords, Method::FiniteDifference, chart);
          CHECK(a.coordinates == f.coordinates);
          CHECK((a.matrix - f.matrix).cwiseAbs().maxCoeff() < 1e-6);
        } catch (const ChartError&) {
          CHECK(chart == Chart::Standard);
        }
      }
    }
  }
}

TEST_CASE("finite differences stay accurate close to the Standard-chart pole") {
  const auto model = MeanFieldModel::ddm(2.0, 1.0, 1.0);
  for (double mx : {1e-1, 1e-2, 4e-3, 1e-3}) {
    const double rest = std::sqrt(1.0 - mx * mx);
    const State q(mx, 0.7 * rest / std::hypot(0.7, 0.7), -0.7 * rest / std::hypot(0.7, 0.7));
    const auto a = reduced_jacobian(model, q, Method::Analytic);
    const auto f = reduced_jacobian(model, q, Method::FiniteDifference);
    CAPTURE(mx);
    CHECK((a.matrix - f.matrix).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, a.matrix.norm()));
  }
}

TEST_CASE("phase labels") {
  CHECK(phase_classify(MeanFieldModel::ddm(2.0, 1.0, 1.0)).phase == Phase::PT);
  CHECK(phase_classify(MeanFieldModel::ddm(2.0, 1.0, 1.9)).phase == Phase::PPTB);
  CHECK(phase_classify(MeanFieldModel::ddm(2.0, 1.0, 2.5)).phase == Phase::FPTB);
  const auto p = phase_classify(MeanFieldModel::ddm(2.0, 1.0, 1.9));
  CHECK(p.n_symmetric == 2);
  CHECK(p.n_broken == 2);
}

TEST_CASE("DDM boundary scan finds both CEPs") {
  auto family = [](double kappa) { return MeanFieldModel::ddm(2.0, 1.0, kappa); };
  const auto boundaries = scan_phase_boundaries(family, 1.0, 2.5, 16);
  REQUIRE(boundaries.size() == 2);
  CHECK(boundaries[0].location == doctest::Approx(std::sqrt(3.0)).epsilon(1e-6));
  CHECK(boundaries[0].below == Phase::PT);
  CHECK(boundaries[0].above == Phase::PPTB);
  CHECK(boundaries[1].location == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(boundaries[1].above == Phase::FPTB);
  for (const auto& b : boundaries) {
    CHECK(b.cep.metric > 0.999);
    CHECK(b.cep.cep);
    CHECK(std::abs(b.eigenvalues[0]) < 1e-2);
  }
}

TEST_CASE("LMG boundary scan flips once at kappa = g") {
  auto family = [](double kappa) { return MeanFieldModel::lmg(1.0, kappa); };
  const auto boundaries = scan_phase_boundaries(family, 0.5, 1.5, 21);
  REQUIRE(boundaries.size() == 1);
  CHECK(boundaries[0].location == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(boundaries[0].cep.cep);
}

TEST_CASE("gain-loss dimer") {
  auto demo = nonhermitian_pt_demo(1.0, 0.0);
  CHECK(demo.regime == Regime::Unbroken);
  CHECK(pair_distance(demo.eigenvalues, {Complex(1), Complex(-1)}) < 1e-15);
  demo = nonhermitian_pt_demo(1.0, 1.0);
  CHECK(demo.regime == Regime::ExceptionalPoint);
  CHECK(std::abs(demo.eigenvalues[0]) < 1e-7);
  demo = nonhermitian_pt_demo(1.0, 2.0);
  CHECK(demo.regime == Regime::Broken);
  CHECK(pair_distance(demo.eigenvalues, {Complex(0, std::sqrt(3.0)), Complex(0, -std::sqrt(3.0))}) < 1e-14);
  CHECK(demo.hamiltonian(0, 0) == Complex(0, -2.0));
  CHECK_THROWS_AS(nonhermitian_pt_demo(-1.0, 0.5), DomainError);
}

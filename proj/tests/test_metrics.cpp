#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "qpme/metrics.hpp"

using namespace qpme;

namespace {

SliceEvaluator fdc_evaluator(std::vector<double> a) {
  return pointwise([a](double, std::span<const double> x) {
    const FdcJets<double> f = fdc_jets<double>(x, a);
    return SlicePoint{f.value, f.d1[0], x.size() >= 2 ? f.d1[1] : 0.0};
  });
}

Model small_model(AnsatzKind kind, std::size_t d) {
  MlpSpec s;
  s.input_dim = d + 1;
  s.hidden_widths = {8, 8};
  return Model{kind, std::vector<MlpSpec>(network_count(kind), s), DomainSpec::cube(d, 3.0, 1.0),
               InitialCondition::barenblatt(d)};
}

double scalar_u(const Model& m, const ParamVector& p, double t, std::span<const double> x) {
  const auto& a = m.domain.half_widths;
  if (is_pinn(m.ansatz)) return eval_u(m.ansatz, m.nets[0], p, t, x, a, m.u0).u;
  if (m.ansatz == AnsatzKind::PhiHardBc) return recover_u_phi(eval_phi(m.nets[0], p, t, x, a, m.domain.T)).u;
  return eval_q_sigma(m.ansatz, m.nets[0], m.net_param_vector(p, 0), m.nets[1], m.net_param_vector(p, 1), t, x, a,
                      m.domain.T)
      .u.u;
}

}  // namespace

TEST_CASE("slice nodes are cell centres and the centre node carries the peak") {
  const auto spec = BarenblattSpec::shifted(2);
  const SliceGrid g = eval_slice(exact_slice_evaluator(spec), DomainSpec::cube(2, 4.0, 1.0), 0.5, 1.0, 101);
  CHECK(g.values.size() == 101u * 101u);
  CHECK(g.coordinate(0) == doctest::Approx(-4.0 + 4.0 / 101.0));
  CHECK(g.coordinate(50) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(g.value(50, 50) == doctest::Approx(1.0 / std::sqrt(1.5)).epsilon(1e-14));
  CHECK(g.value(50, 50) == doctest::Approx(0.8165).epsilon(1e-4));
  double mx = 0.0;
  for (double v : g.values) mx = std::max(mx, v);
  CHECK(mx == g.value(50, 50));
}

TEST_CASE("d = 1 slice is a line") {
  const auto spec = BarenblattSpec::shifted(1);
  const SliceGrid g = eval_slice(exact_slice_evaluator(spec), DomainSpec::cube(1, 4.0, 1.0), 0.5, 1.0, 40);
  CHECK(g.ny() == 1u);
  CHECK(g.values.size() == 40u);
  CHECK(g.cell_weight() == doctest::Approx(0.2));
  for (const auto& gr : g.grad) CHECK(gr[1] == 0.0);
}

TEST_CASE("relative errors: identity, scaling, zero exact") {
  const auto spec = BarenblattSpec::shifted(2);
  const DomainSpec dom = DomainSpec::cube(2, 4.0, 1.0);
  const SliceGrid ex = eval_slice(exact_slice_evaluator(spec), dom, 0.5, 1.0, 60);
  const RelativeErrors same = relative_errors(ex, ex);
  CHECK(same.l1 == 0.0);
  CHECK(same.l2 == 0.0);
  CHECK(same.h1 == 0.0);

  SliceGrid scaled = ex;
  for (auto& v : scaled.values) v *= 1.1;
  for (auto& g : scaled.grad) g = {1.1 * g[0], 1.1 * g[1]};
  const RelativeErrors e = relative_errors(scaled, ex);
  CHECK(e.l1 == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(e.l2 == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(e.h1 == doctest::Approx(0.1).epsilon(1e-12));

  SliceGrid zero = ex;
  for (auto& v : zero.values) v = 0.0;
  for (auto& g : zero.grad) g = {0.0, 0.0};
  CHECK_THROWS_AS(relative_errors(ex, zero), DomainError);

  SliceGrid other = eval_slice(exact_slice_evaluator(spec), dom, 0.25, 1.0, 60);
  CHECK_THROWS_AS(relative_errors(other, ex), ContractError);
}

TEST_CASE("discrete norms of f_dc converge at second order") {
  // Integrals of (1 - x^2/a^2)(1 - y^2/a^2) over [-a, a]^2 in closed form.
  const double a = 4.0;
  const double l1 = std::pow(4.0 * a / 3.0, 2);
  const double l2sq = std::pow(16.0 * a / 15.0, 2);
  const double h1sq = l2sq + 2.0 * (8.0 / (3.0 * a)) * (16.0 * a / 15.0);
  const DomainSpec dom = DomainSpec::cube(2, a, 1.0);
  std::vector<double> err1, err2, errh;
  for (std::size_t n : {50u, 100u, 200u}) {
    const SliceNorms s = slice_norms(eval_slice(fdc_evaluator({a, a}), dom, 0.5, 0.0, n));
    err1.push_back(std::fabs(s.l1 - l1));
    err2.push_back(std::fabs(s.l2 * s.l2 - l2sq));
    errh.push_back(std::fabs(s.h1 * s.h1 - h1sq));
  }
  for (const auto* e : {&err1, &errh}) {
    CHECK((*e)[0] / (*e)[1] == doctest::Approx(4.0).epsilon(0.02));
    CHECK((*e)[1] / (*e)[2] == doctest::Approx(4.0).epsilon(0.02));
  }
  // f_dc^2 has zero slope at the walls, so the h^2 midpoint term cancels and
  // the squared L2 norm converges at fourth order.
  CHECK(err2[0] / err2[1] == doctest::Approx(16.0).epsilon(0.02));
  CHECK(err2[1] / err2[2] == doctest::Approx(16.0).epsilon(0.02));
  CHECK(err2[2] < 1e-7);
}

TEST_CASE("model slice evaluators match the scalar path and finite differences") {
  for (AnsatzKind kind : {AnsatzKind::PinnHardIcHardBc, AnsatzKind::PinnSoftIcSoftBc, AnsatzKind::PhiHardBc,
                          AnsatzKind::QSigma, AnsatzKind::QSigmaGrowing}) {
    for (std::size_t d : {1u, 3u}) {
      CAPTURE(to_string(kind));
      CAPTURE(d);
      const Model m = small_model(kind, d);
      Rng rng(11);
      ParamVector p = init_model_params(m, rng);
      for (auto& v : p.data) v += 0.05 * rng.normal();
      const SliceEvaluator f = model_slice_evaluator(m, p);
      const double t = kind == AnsatzKind::PhiHardBc ? 0.6 : 0.3;
      Eigen::MatrixXd pts(d + 1, 3);
      for (Eigen::Index j = 0; j < 3; ++j) {
        pts(0, j) = t;
        for (std::size_t k = 0; k < d; ++k) pts(k + 1, j) = 0.7 * rng.normal();
      }
      const auto out = f(pts);
      for (Eigen::Index j = 0; j < 3; ++j) {
        std::vector<double> x(pts.col(j).data() + 1, pts.col(j).data() + 1 + d);
        CHECK(out[j].u == doctest::Approx(scalar_u(m, p, t, x)).epsilon(1e-12));
        const double h = 1e-5;
        for (std::size_t dir = 0; dir < std::min<std::size_t>(d, 2); ++dir) {
          auto xp = x, xm = x;
          xp[dir] += h;
          xm[dir] -= h;
          const double fd = (scalar_u(m, p, t, xp) - scalar_u(m, p, t, xm)) / (2.0 * h);
          CHECK((dir == 0 ? out[j].gx : out[j].gy) == doctest::Approx(fd).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("growing q-sigma slice at t = 0") {
  const Model m = small_model(AnsatzKind::QSigmaGrowing, 2);
  Rng rng(5);
  const ParamVector p = init_model_params(m, rng);
  const SliceEvaluator f = model_slice_evaluator(m, p);
  Eigen::MatrixXd pts(3, 1);
  pts << 0.0, 0.4, -0.9;
  const SlicePoint s = f(pts)[0];
  std::vector<double> x{0.4, -0.9};
  CHECK(s.u == doctest::Approx(scalar_u(m, p, 0.0, x)).epsilon(1e-12));
  const double h = 1e-5;
  auto xp = x, xm = x;
  xp[1] += h;
  xm[1] -= h;
  CHECK(s.gy == doctest::Approx((scalar_u(m, p, 0.0, xp) - scalar_u(m, p, 0.0, xm)) / (2.0 * h)).epsilon(1e-6));
}

TEST_CASE("constraint audit counts violations") {
  PointBatch pts;
  pts.points.resize(2, 4);
  pts.points << 0.0, 0.5, 0.9, 1.0, 0.1, -0.2, 0.3, 0.0;
  pts.c.assign(4, 1.0);
  // den = 1 - lap = 0.8 falls below (t/T)^(1/3) once t/T > 0.512.
  const PhiEvaluator phi = [](double, std::span<const double>) { return PhiDerivs<double>{0.0, -0.1, 0.2}; };
  const ConstraintReport r = constraint_audit(phi, pts, 1.0);
  CHECK(r.samples == 4u);
  CHECK(r.denominator_violation == doctest::Approx(0.5));
  CHECK(r.negative_u == doctest::Approx(1.0));
  CHECK(r.min_denominator == doctest::Approx(0.8));

  QSigmaEvaluator qs;
  qs.values = [](double t, std::span<const double>) { return QSigmaValues<double>{1.0, t > 0.6 ? 1.0 : 0.5}; };
  const ConstraintReport q = constraint_audit(qs, pts, 1.0);
  CHECK(q.sigma_violation == doctest::Approx(0.25));
  CHECK(q.negative_u == 0.0);
  CHECK(q.min_denominator == doctest::Approx(0.5));
}

TEST_CASE("slice CSV layout") {
  const auto spec = BarenblattSpec::shifted(2);
  const SliceGrid g = eval_slice(exact_slice_evaluator(spec), DomainSpec::cube(2, 4.0, 1.0), 0.5, 1.0, 3);
  std::ostringstream os;
  write_slice_csv(os, g);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x,y,value,gx,gy");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 9);
}

TEST_CASE("slice rejects non-finite evaluators") {
  const SliceEvaluator bad = pointwise([](double, std::span<const double>) { return SlicePoint{NAN, 0.0, 0.0}; });
  CHECK_THROWS_AS(eval_slice(bad, DomainSpec::cube(2, 1.0, 1.0), 0.5, 0.0, 4), NonFiniteError);
}

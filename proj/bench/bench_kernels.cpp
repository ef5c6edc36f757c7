// Fast paths against the serial references they are tested against:
// batched jets vs per-sample scalar jets, the chunked loss vs the single-tape
// loss, and the row-parallel FD step vs the serial one.

#include <benchmark/benchmark.h>

#include <cmath>

#include "qpme/batch_jet.hpp"
#include "qpme/fdref.hpp"
#include "qpme/parallel.hpp"
#include "qpme/training.hpp"

using namespace qpme;

namespace {

MlpSpec spec(std::size_t d, std::size_t width) {
  MlpSpec s;
  s.input_dim = d + 1;
  s.hidden_widths = {width, width};
  return s;
}

Eigen::MatrixXd inputs(std::size_t d, Eigen::Index n) {
  Rng rng(1);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d + 1), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x(0, j) = rng.uniform();
    for (std::size_t i = 1; i <= d; ++i) x(static_cast<Eigen::Index>(i), j) = rng.uniform(-2.0, 2.0);
  }
  return x;
}

void BM_JetScalar(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  const MlpSpec s = spec(d, 64);
  Rng rng(2);
  const ParamVector p = init_params(s, rng);
  const Eigen::MatrixXd x = inputs(d, 64);
  for (auto _ : state) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double* col = x.col(j).data();
      benchmark::DoNotOptimize(spacetime_derivs(s, p, col[0], {col + 1, d}));
    }
  }
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_JetScalar)->Arg(1)->Arg(2)->Arg(5);

void BM_JetBatched(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  const MlpSpec s = spec(d, 64);
  Rng rng(2);
  const ParamVector p = init_params(s, rng);
  const Eigen::MatrixXd x = inputs(d, 64);
  BatchJetKernel k(s, JetMode::Full);
  for (auto _ : state) benchmark::DoNotOptimize(k.forward(p, x).value.data());
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_JetBatched)->Arg(1)->Arg(2)->Arg(5);

TrainConfig loss_config(FormulationKind kind) {
  TrainConfig c;
  c.formulation.kind = kind;
  c.ansatz = default_ansatz(kind);
  c.width = 32;
  return c;
}

struct LossFixture {
  TrainConfig cfg;
  Model model;
  ParamVector params;
  TrainingBatch batch;

  explicit LossFixture(FormulationKind kind) : cfg(loss_config(kind)), model(cfg.model()) {
    Rng rng(3);
    params = init_model_params(model, rng);
    const MixtureSampler sampler(cfg.mixture(), cfg.T);
    batch = draw_batch(rng, sampler, model.domain, 256, cfg.boundary_batch_size());
  }
};

const FormulationKind kKinds[] = {FormulationKind::PinnL2, FormulationKind::Phi, FormulationKind::QSigma};

void BM_LossChunked(benchmark::State& state) {
  const LossFixture f(kKinds[state.range(0)]);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_loss(f.model, f.cfg.formulation, f.params, f.batch).grad);
  state.SetLabel(to_string(f.cfg.formulation.kind));
}
BENCHMARK(BM_LossChunked)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_LossReference(benchmark::State& state) {
  const LossFixture f(kKinds[state.range(0)]);
  for (auto _ : state) benchmark::DoNotOptimize(reference_loss(f.model, f.cfg.formulation, f.params, f.batch).grad);
  state.SetLabel(to_string(f.cfg.formulation.kind));
}
BENCHMARK(BM_LossReference)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

FdGrid waiting_grid(double h) {
  FdGrid g = FdGrid::make(2, 4.0, h, [](std::span<const double> x) {
    const double r = std::hypot(x[0], x[1]);
    return r <= M_PI / 2 ? std::cos(r) : 0.0;
  });
  g.dt = 0.9 * stable_dt(g);
  return g;
}

void BM_FdStepParallel(benchmark::State& state) {
  configure_threads();
  FdGrid g = waiting_grid(0.02);
  for (auto _ : state) fd_step(g);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.field.size()));
}
BENCHMARK(BM_FdStepParallel);

void BM_FdStepSerial(benchmark::State& state) {
  FdGrid g = waiting_grid(0.02);
  for (auto _ : state) fd_step_serial(g);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.field.size()));
}
BENCHMARK(BM_FdStepSerial);

}  // namespace

BENCHMARK_MAIN();

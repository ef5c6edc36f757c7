#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "qpme/training.hpp"

using namespace qpme;

namespace {

TrainConfig tiny(FormulationKind k, std::size_t d = 1) {
  TrainConfig c;
  c.dim = d;
  c.formulation.kind = k;
  c.formulation.nu = 10.0;
  c.formulation.gamma = k == FormulationKind::QSigma ? 1.0 : 0.0;
  c.ansatz = default_ansatz(k);
  c.width = 8;
  c.batch = 64;
  c.steps = 20;
  c.lr = 1e-3;
  c.seed = 3;
  c.eval_every = 0;
  c.eval_n = 20;
  return c;
}

std::string history_csv(const TrainResult& r) {
  std::ostringstream os;
  write_history_csv(os, r.history);
  return os.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("qpme_test_" + name);
}

}  // namespace

TEST_CASE("adam: zero gradient leaves parameters and decays moments") {
  AdamState s = AdamState::fresh(2, 0.1);
  s.m = {0.5, -0.25};
  s.v = {0.04, 0.01};
  std::vector<double> p{1.0, 2.0};
  adam_step(p, std::vector<double>{0.0, 0.0}, s);
  CHECK(s.step == 1u);
  CHECK(s.m[0] == doctest::Approx(0.45));
  CHECK(s.v[1] == doctest::Approx(0.00999));
  // The decayed first moment still moves the parameters; only a fresh state stays put.
  AdamState z = AdamState::fresh(2, 0.1);
  std::vector<double> q{1.0, 2.0};
  adam_step(q, std::vector<double>{0.0, 0.0}, z);
  CHECK(q == std::vector<double>{1.0, 2.0});
  CHECK(z.m == std::vector<double>{0.0, 0.0});
}

TEST_CASE("adam: first step moves each parameter by lr against the gradient sign") {
  AdamState s = AdamState::fresh(4, 0.01);
  std::vector<double> p{0.0, 0.0, 0.0, 0.0};
  const std::vector<double> g{3.0, -0.2, 1e-3, -50.0};
  adam_step(p, g, s);
  for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(-0.01 * std::copysign(1.0, g[i])).epsilon(1e-5));
}

TEST_CASE("adam: two steps match an independent table") {
  // numpy, lr = 0.01, default betas and eps.
  AdamState s = AdamState::fresh(2, 0.01);
  std::vector<double> p{1.0, -1.0};
  adam_step(p, std::vector<double>{0.5, -2.0}, s);
  CHECK(p[0] == doctest::Approx(0.9900000002).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-0.99000000005).epsilon(1e-15));
  adam_step(p, std::vector<double>{0.1, 3.0}, s);
  CHECK(p[0] == doctest::Approx(0.9819695906384652).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-0.9924770182016269).epsilon(1e-15));
  CHECK(s.m[1] == doctest::Approx(0.11999999999999997).epsilon(1e-15));
  CHECK(s.v[1] == doctest::Approx(0.012996000000000011).epsilon(1e-15));
  CHECK(s.step == 2u);
}

TEST_CASE("adam: non-finite gradient names the parameter and changes nothing") {
  AdamState s = AdamState::fresh(3, 0.01);
  std::vector<double> p{1.0, 2.0, 3.0};
  try {
    adam_step(p, std::vector<double>{0.0, 0.0, NAN}, s);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("parameter 2") != std::string::npos);
  }
  CHECK(s.step == 0u);
  CHECK(p == std::vector<double>{1.0, 2.0, 3.0});
  CHECK_THROWS_AS(adam_step(p, std::vector<double>{0.0}, s), ContractError);
}

TEST_CASE("checkpoint: bit-exact round trip and corruption detection") {
  const TrainConfig cfg = tiny(FormulationKind::QSigma);
  Rng rng(9);
  TrainState st{init_model_params(cfg.model(), rng), {}, Rng(4, 0)};
  st.adam = AdamState::fresh(st.params.size(), 1e-3);
  for (std::size_t i = 0; i < st.params.size(); ++i) {
    st.adam.m[i] = rng.normal() * 1e-300;
    st.adam.v[i] = std::ldexp(rng.uniform(), -1070);
  }
  st.params.data[0] = -0.0;
  st.adam.step = 17;
  rng.normal();
  st.rng = rng;
  const Checkpoint c = make_checkpoint(cfg, st);
  const std::string bytes = encode_checkpoint(c);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back == c);
  CHECK(std::signbit(back.params.data[0]));
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(checkpoint_config(back) == cfg);

  const auto path = temp_path("ckpt.bin");
  save_checkpoint(path, c);
  CHECK(load_checkpoint(path) == c);
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(decode_checkpoint(flipped), IoError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 9)), IoError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), IoError);
  CHECK_THROWS_AS(decode_checkpoint("PK\x03\x04 definitely not a checkpoint"), IoError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.bin")), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: header stores little-endian dims, seed and step") {
  const TrainConfig cfg = tiny(FormulationKind::PinnL2);
  Rng rng(1);
  TrainState st{init_model_params(cfg.model(), rng), AdamState::fresh(0, 1e-3), Rng(0, 0)};
  st.adam = AdamState::fresh(st.params.size(), 1e-3);
  st.adam.step = 0x0102;
  Checkpoint c = make_checkpoint(cfg, st);
  c.optimizer.reset();
  const std::string b = encode_checkpoint(c);
  CHECK(b.substr(0, 8) == "QPMECKP1");
  CHECK(static_cast<unsigned char>(b[8]) == 1);          // version
  CHECK(static_cast<unsigned char>(b[12]) == 3);         // seed
  CHECK(static_cast<unsigned char>(b[20]) == 0x02);      // step, low byte first
  CHECK(static_cast<unsigned char>(b[21]) == 0x01);
  CHECK(static_cast<unsigned char>(b[28]) == 1);         // one network
  CHECK(static_cast<unsigned char>(b[32]) == 2);         // input_dim
  CHECK(decode_checkpoint(b) == c);
}

TEST_CASE("config JSON round trip, defaults and rejection") {
  TrainConfig c = tiny(FormulationKind::Phi, 2);
  c.formulation.soft_guard = true;
  c.clip_norm = 10.0;
  c.eval_c = 0.25;
  CHECK(train_config_from_json(to_json(c)) == c);
  CHECK(train_config_from_json(nlohmann::json::parse(to_json(c).dump())) == c);

  const TrainConfig q = train_config_from_json(nlohmann::json{{"formulation", "qsigma"}});
  CHECK(q.ansatz == AnsatzKind::QSigma);
  CHECK(q.batch == 1000u);
  CHECK(q.eval_every == 500u);

  auto rejects = [](const nlohmann::json& j, const std::string& needle) {
    try {
      train_config_from_json(j);
      return false;
    } catch (const ContractError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
  };
  CHECK(rejects(nlohmann::json{{"widht", 3}}, "widht"));
  CHECK(rejects(nlohmann::json{{"steps", "many"}}, "steps"));
  CHECK(rejects(nlohmann::json{{"steps", -4}}, "steps"));
  CHECK(rejects(nlohmann::json{{"formulation", "pinn-l3"}}, "formulation"));
  CHECK(rejects(nlohmann::json{{"soft_guard", 1}}, "soft_guard"));
  CHECK(rejects(nlohmann::json::array(), "object"));
  CHECK(train_config_keys().size() == to_json(TrainConfig{}).size());

  TrainConfig bad = tiny(FormulationKind::Phi);
  bad.ansatz = AnsatzKind::PinnSoftIcHardBc;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = tiny(FormulationKind::PinnL2);
  bad.theta0 = 0.8;
  bad.theta1 = 0.3;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("table presets") {
  const TrainConfig p2 = table_preset("pinn", 2);
  CHECK(p2.formulation.kind == FormulationKind::PinnL2);
  CHECK(p2.ansatz == AnsatzKind::PinnSoftIcHardBc);
  CHECK(p2.formulation.nu == 1e3);
  CHECK(p2.formulation.kappa == 1.0);
  CHECK(p2.theta0 == 0.3);
  CHECK(p2.theta1 == 0.3);
  CHECK(p2.width == 200u);
  CHECK(p2.depth == 2u);
  CHECK(p2.lr == 1e-3);
  CHECK(p2.steps == 100000u);
  CHECK(p2.batch == 1000u);
  CHECK(table_preset("pinn", 1).model().num_params() == 41001u);
  CHECK(table_preset("pinn", 15).model().num_params() == 43801u);
  CHECK(table_preset("pinn", 20).model().num_params() == 169601u);
  CHECK(table_preset("pinn", 50).model().num_params() == 181601u);
  CHECK(table_preset("pinn", 50).theta1 == 0.2);
  CHECK(table_preset("pinn", 10).formulation.kappa == 1e3);

  const TrainConfig f20 = table_preset("phi", 20);
  CHECK(f20.formulation.kappa == 1e5);
  CHECK(f20.theta0 == 0.2);
  CHECK(f20.steps == 600000u);
  CHECK(table_preset("phi", 50).lr == 1e-4);
  CHECK(table_preset("phi", 5).formulation.nu == 1.0);
  CHECK(table_preset("phi", 4).formulation.nu == 1e3);

  CHECK(table_preset("qsigma", 1).model().num_params() == 82002u);
  CHECK(table_preset("qsigma", 10).model().num_params() == 85602u);
  CHECK(table_preset("qsigma", 10).formulation.gamma == 1.0);
  CHECK(table_preset("qsigma", 5).formulation.gamma == 1e3);
  CHECK_THROWS_AS(table_preset("qsigma", 15), ContractError);
  CHECK_THROWS_AS(table_preset("pinn", 7), ContractError);
  CHECK_THROWS_AS(table_preset("fem", 1), ContractError);
  for (const char* t : {"pinn", "phi", "qsigma"}) CHECK_NOTHROW(table_preset(t, 3).validate());
}

TEST_CASE("manifest round trip") {
  RunManifest m;
  m.status = "ok";
  m.message = "done";
  m.config = to_json(tiny(FormulationKind::PinnL1));
  m.source_id = source_id();
  m.started = utc_timestamp();
  m.finished = m.started;
  m.steps_completed = 12;
  m.threads = 3;
  m.metrics = {{"rel_l2", 0.1 + 0.2}, {"loss_total", 1e-300}};
  m.checkpoint = "/tmp/x.ckpt";
  CHECK(RunManifest::from_json(nlohmann::json::parse(m.to_json().dump())) == m);
  CHECK_THROWS_AS(RunManifest::from_json(nlohmann::json{{"status", "ok"}}), IoError);
  CHECK(m.started.size() == 20u);
}

TEST_CASE("one training step changes the parameters") {
  TrainConfig c = tiny(FormulationKind::PinnL2);
  c.steps = 1;
  Rng rng(c.seed, 0);
  const ParamVector init = init_model_params(c.model(), rng);
  const TrainResult r = train(c);
  REQUIRE(r.ok());
  CHECK(r.history.size() == 1u);
  CHECK(r.state.adam.step == 1u);
  CHECK_FALSE(r.state.params == init);
  CHECK(r.manifest.steps_completed == 1u);
  CHECK(r.manifest.metrics.count("rel_l2") == 1u);
}

TEST_CASE("identical config and seed give identical histories") {
  omp_set_num_threads(1);
  for (FormulationKind k : {FormulationKind::PinnL2, FormulationKind::PinnL1, FormulationKind::Phi,
                            FormulationKind::QSigma}) {
    CAPTURE(to_string(k));
    TrainConfig c = tiny(k);
    c.formulation.soft_guard = true;
    const TrainResult a = train(c);
    const TrainResult b = train(c);
    REQUIRE(a.ok());
    CHECK(history_csv(a) == history_csv(b));
    CHECK(a.state.params == b.state.params);
    c.seed += 1;
    CHECK(history_csv(train(c)) != history_csv(a));
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("resume from a checkpoint continues bit for bit") {
  for (FormulationKind k : {FormulationKind::PinnL2, FormulationKind::QSigma}) {
    CAPTURE(to_string(k));
    TrainConfig full = tiny(k);
    full.steps = 16;
    const TrainResult whole = train(full);

    TrainConfig half = full;
    half.steps = 7;
    const TrainResult first = train(half);
    TrainOptions opt;
    opt.resume = decode_checkpoint(encode_checkpoint(make_checkpoint(half, first.state)));
    const TrainResult rest = train(full, opt);
    REQUIRE(rest.ok());
    CHECK(rest.state.params == whole.state.params);
    CHECK(rest.state.adam == whole.state.adam);
    CHECK(rest.state.rng == whole.state.rng);
    REQUIRE(rest.history.size() == 9u);
    std::vector<HistoryRow> tail(whole.history.begin() + 7, whole.history.end());
    std::ostringstream a, b;
    write_history_csv(a, tail);
    write_history_csv(b, rest.history);
    CHECK(a.str() == b.str());
  }
}

TEST_CASE("resume rejects mismatched checkpoints") {
  TrainConfig c = tiny(FormulationKind::PinnL2);
  c.steps = 2;
  const TrainResult r = train(c);
  TrainOptions opt;
  opt.resume = make_checkpoint(c, r.state);
  TrainConfig wider = c;
  wider.width = 9;
  CHECK_THROWS_AS(train(wider, opt), ContractError);
  TrainConfig reseeded = c;
  reseeded.seed = 99;
  CHECK_THROWS_AS(train(reseeded, opt), ContractError);
  opt.resume->optimizer.reset();
  CHECK_THROWS_AS(train(c, opt), ContractError);
}

TEST_CASE("periodic checkpoints are written atomically") {
  TrainConfig c = tiny(FormulationKind::PinnL2);
  c.steps = 6;
  TrainOptions opt;
  opt.checkpoint_path = temp_path("periodic.ckpt");
  opt.checkpoint_every = 4;
  const TrainResult r = train(c, opt);
  const Checkpoint ck = load_checkpoint(opt.checkpoint_path);
  CHECK(ck.step == 4u);
  CHECK(r.manifest.checkpoint == opt.checkpoint_path.string());
  std::filesystem::remove(opt.checkpoint_path);
}

TEST_CASE("zero gamma: the consistency norm cannot influence training") {
  TrainConfig a = tiny(FormulationKind::QSigma);
  a.formulation.gamma = 0.0;
  TrainConfig b = a;
  b.formulation.consistency_norm = Norm::L1;
  b.formulation.correction.consistency = true;
  const TrainResult ra = train(a);
  const TrainResult rb = train(b);
  CHECK(ra.state.params == rb.state.params);
  std::vector<double> totals_a, totals_b;
  for (const auto& h : ra.history) totals_a.push_back(h.loss.total);
  for (const auto& h : rb.history) totals_b.push_back(h.loss.total);
  CHECK(totals_a == totals_b);
  bool differs = false;
  for (std::size_t i = 0; i < ra.history.size(); ++i)
    differs = differs || ra.history[i].loss.consistency != rb.history[i].loss.consistency;
  CHECK(differs);
}

TEST_CASE("evaluation cadence and entropy gap bookkeeping") {
  TrainConfig c = tiny(FormulationKind::Phi);
  c.formulation.soft_guard = true;
  c.steps = 10;
  c.eval_every = 4;
  const TrainResult r = train(c);
  REQUIRE(r.ok());
  REQUIRE(r.evals.size() == 3u);
  CHECK(r.evals[0].step == 4u);
  CHECK(r.evals[1].step == 8u);
  CHECK(r.evals[2].step == 10u);
  CHECK(r.manifest.metrics.at("rel_l2") == r.evals.back().errors.l2);
  const auto gaps = entropy_gap(r.history);
  CHECK(gaps.size() == 10u);
  CHECK(r.manifest.metrics.count("gap_final") == 1u);

  const TrainResult p = train(tiny(FormulationKind::PinnL2));
  CHECK(entropy_gap(p.history).empty());

  TrainConfig w = tiny(FormulationKind::PinnL2);
  w.problem = Problem::Waiting;
  w.eval_every = 5;
  const TrainResult wr = train(w);
  CHECK(wr.ok());
  CHECK(wr.evals.empty());
  CHECK(wr.manifest.metrics.count("rel_l2") == 0u);
}

TEST_CASE("gap trend averages windows") {
  std::vector<GapPoint> g;
  for (std::uint64_t s = 1; s <= 10; ++s) g.push_back({s, s <= 5 ? -4.0 : 1.0});
  const GapTrend t = gap_trend(g, 5);
  CHECK(t.initial == 4.0);
  CHECK(t.final == 1.0);
  CHECK(gap_trend(g, 50).initial == doctest::Approx(1.5));
  CHECK_THROWS_AS(gap_trend({}, 5), ContractError);
}

TEST_CASE("phi zero network: entropy gap equals the Monte Carlo square of the exact solution") {
  TrainConfig c = tiny(FormulationKind::Phi);
  c.steps = 1;
  c.lr = 1e-300;
  // phi = (T - t) f_dc NN with all-zero output weights is phi == 0 at step 1.
  TrainOptions opt;
  Rng rng(c.seed, 0);
  TrainState st{init_model_params(c.model(), rng), {}, rng};
  std::fill(st.params.data.end() - 9, st.params.data.end(), 0.0);
  st.adam = AdamState::fresh(st.params.size(), c.lr);
  opt.resume = make_checkpoint(c, st);
  const TrainResult r = train(c, opt);
  REQUIRE(r.history.size() == 1u);
  CHECK(r.history[0].loss.first == 0.0);
  CHECK(r.history[0].entropy_gap > 0.0);
  Rng replay = st.rng;
  const MixtureSampler sampler(c.mixture(), c.T);
  const TrainingBatch b = draw_batch(replay, sampler, c.domain(), c.batch, 0);
  CHECK(r.history[0].entropy_gap == exact_square_mean(b, *c.exact()));
}

TEST_CASE("history CSV layout") {
  std::vector<HistoryRow> h{{1, {1.5, 0.5, 0.0, 1.0, 0.0}, NAN}};
  std::ostringstream os;
  write_history_csv(os, h);
  CHECK(os.str() == "step,total,objective,boundary,initial,consistency\n1,1.5,0.5,0,1,0\n");
}

#include <benchmark/benchmark.h>

#include "smrl/dataset.hpp"
#include "smrl/envlike.hpp"
#include "smrl/ppo.hpp"
#include "smrl/rng.hpp"
#include "smrl/selfmodel.hpp"
#include "smrl/tape.hpp"

using namespace smrl;

namespace {

SelfModel tiny_trained_setup(int hidden, int n, Dataset& ds_out) {
  EnvDescriptor desc = make_descriptor(EnvId::kPendulum);
  ds_out = collect_random(desc, 2000, 200, 7);
  SelfModelConfig cfg;
  cfg.hidden_size = hidden;
  cfg.decoder_hidden = hidden;
  cfg.n = n;
  NormStats norm = compute_norm_stats(ds_out);
  return make_self_model(desc.state_dim, desc.action_dim, cfg, norm, 11);
}

}  // namespace

static void BM_GruCellForward(benchmark::State& state) {
  std::size_t hid = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  ParamStore ps;
  for (const char* g : {"z", "r", "h"}) {
    ps.add(std::string("g.W") + g, init_weight(hid, 4, rng));
    ps.add(std::string("g.U") + g, init_weight(hid, hid, rng));
    ps.add(std::string("g.b") + g, Tensor::zeros({hid, 1}));
  }
  GruParams p{&ps.value("g.Wz"), &ps.value("g.Uz"), &ps.value("g.bz"),
              &ps.value("g.Wr"), &ps.value("g.Ur"), &ps.value("g.br"),
              &ps.value("g.Wh"), &ps.value("g.Uh"), &ps.value("g.bh")};
  Tensor x = Tensor::zeros({4, 1});
  Tensor h = Tensor::zeros({hid, 1});
  for (auto _ : state) {
    h = gru_cell_forward(p, x, h);
    benchmark::DoNotOptimize(h.data.data());
  }
}
BENCHMARK(BM_GruCellForward)->Arg(64)->Arg(128);

static void BM_WindowBatchBackward(benchmark::State& state) {
  Dataset ds;
  SelfModel m = tiny_trained_setup(static_cast<int>(state.range(0)),
                                   static_cast<int>(state.range(1)), ds);
  WindowSet ws = extract_sequences(ds, static_cast<std::size_t>(m.config.n), 10);
  std::vector<Window> batch;
  for (std::size_t i = 0; i < 32 && i < ws.windows.size(); ++i)
    batch.push_back(materialize_window(ds, ws.windows[i], static_cast<std::size_t>(m.config.n)));
  WindowBatch wb = make_window_batch(m, batch);
  for (auto _ : state) {
    Tape t(&m.params);
    LossNodes nodes = build_loss_graph(t, m, wb);
    t.backward(nodes.total);
    m.params.zero_grads();
    benchmark::DoNotOptimize(nodes.total);
  }
}
BENCHMARK(BM_WindowBatchBackward)->Args({128, 100})->Unit(benchmark::kMillisecond);

static void BM_OpenLoopRollout(benchmark::State& state) {
  Dataset ds;
  SelfModel m = tiny_trained_setup(128, 100, ds);
  Rng rng(5);
  std::vector<Action> actions(200, Action{0.0});
  for (Action& a : actions) a[0] = rng.uniform(-1.0, 1.0);
  EnvState s0 = ds.episodes[0][0].s;
  for (auto _ : state) {
    auto out = rollout_open_loop(m, s0, actions);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_OpenLoopRollout)->Unit(benchmark::kMillisecond);

static void BM_EnvStep(benchmark::State& state) {
  EnvDescriptor desc = make_descriptor(EnvId::kPointHopper);
  EnvState s = env_reset(desc, 1);
  Action a{0.3, 0.8};
  for (auto _ : state) {
    s = env_step(desc, s, a);
    benchmark::DoNotOptimize(s.data());
  }
}
BENCHMARK(BM_EnvStep);

static void BM_Gae(benchmark::State& state) {
  Rng rng(9);
  std::size_t T = 2048;
  std::vector<double> rewards(T), values(T + 1);
  std::vector<int> dones(T, 0);
  for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
  for (double& v : values) v = rng.uniform(-1.0, 1.0);
  std::vector<double> adv, ret;
  for (auto _ : state) {
    gae(rewards, values, dones, 0.99, 0.95, adv, ret);
    benchmark::DoNotOptimize(adv.data());
  }
}
BENCHMARK(BM_Gae);

BENCHMARK_MAIN();

#include "smrl/selfmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smrl/optim.hpp"
#include "smrl/rng.hpp"
#include "smrl/serialize.hpp"

namespace smrl {

using nlohmann::json;

namespace {

GruParams gru_view(const ParamStore& ps, const std::string& prefix) {
  return {&ps.value(prefix + ".Wz"), &ps.value(prefix + ".Uz"), &ps.value(prefix + ".bz"),
          &ps.value(prefix + ".Wr"), &ps.value(prefix + ".Ur"), &ps.value(prefix + ".br"),
          &ps.value(prefix + ".Wh"), &ps.value(prefix + ".Uh"), &ps.value(prefix + ".bh")};
}

void add_gru_params(ParamStore& ps, const std::string& prefix, int input, int hidden,
                    Rng& rng) {
  std::size_t in = static_cast<std::size_t>(input);
  std::size_t hid = static_cast<std::size_t>(hidden);
  for (const char* gate : {"z", "r", "h"}) {
    ps.add(prefix + ".W" + gate, init_weight(hid, in, rng));
    ps.add(prefix + ".U" + gate, init_weight(hid, hid, rng));
    ps.add(prefix + ".b" + gate, Tensor::zeros({hid, 1}));
  }
}

Tensor column(const std::vector<double>& v) {
  Tensor t = Tensor::zeros({v.size(), 1});
  t.data.assign(v.begin(), v.end());
  return t;
}

std::vector<double> to_vec(const Tensor& t) {
  return {t.data.begin(), t.data.end()};
}

// decoder: hidden -> tanh(dec_hidden) -> linear state_dim
Tensor decode_norm(const SelfModel& m, const Tensor& h) {
  Tensor a = dense_forward(m.params.value("decoder.W1"), m.params.value("decoder.b1"), h);
  for (double& v : a.data) v = std::tanh(v);
  return dense_forward(m.params.value("decoder.W2"), m.params.value("decoder.b2"), a);
}

Tensor null_hidden(const SelfModel& m) {
  return Tensor::zeros({static_cast<std::size_t>(m.config.hidden_size), 1});
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace

SelfModel make_self_model(int state_dim, int action_dim, const SelfModelConfig& cfg,
                          const NormStats& norm, std::uint64_t init_seed) {
  require(cfg.hidden_size >= 1, "hidden_size must be >= 1");
  require(cfg.n >= 1, "window length n must be >= 1");
  require(cfg.w_recon >= 0 && cfg.w_single >= 0 && cfg.w_seq >= 0 &&
              cfg.w_recon + cfg.w_single + cfg.w_seq > 0,
          "loss weights must be nonnegative and not all zero");

  SelfModel m;
  m.state_dim = state_dim;
  m.action_dim = action_dim;
  m.config = cfg;
  m.norm = norm;

  Rng rng(derive_seed(init_seed, "selfmodel/init"));
  add_gru_params(m.params, "corrector", state_dim, cfg.hidden_size, rng);
  add_gru_params(m.params, "predictor", action_dim, cfg.hidden_size, rng);
  std::size_t hid = static_cast<std::size_t>(cfg.hidden_size);
  std::size_t dec = static_cast<std::size_t>(cfg.decoder_hidden);
  std::size_t sd = static_cast<std::size_t>(state_dim);
  m.params.add("decoder.W1", init_weight(dec, hid, rng));
  m.params.add("decoder.b1", Tensor::zeros({dec, 1}));
  m.params.add("decoder.W2", init_weight(sd, dec, rng));
  m.params.add("decoder.b2", Tensor::zeros({sd, 1}));
  return m;
}

CorrectResult correct(const SelfModel& m, const HiddenState* prev, const EnvState& s) {
  require(static_cast<int>(s.size()) == m.state_dim, "correct: state dim mismatch");
  Tensor h_in = prev ? prev->h : null_hidden(m);
  Tensor x = column(m.norm.apply(s));
  Tensor h = gru_cell_forward(gru_view(m.params, "corrector"), x, h_in);
  Tensor recon_n = decode_norm(m, h);

  CorrectResult r;
  r.h.h = std::move(h);
  r.h.step = (prev ? prev->step : 0) + 1;
  r.h.grounded_at = r.h.step;
  r.s_recon = m.norm.invert(to_vec(recon_n));
  return r;
}

PredictResult predict(const SelfModel& m, const HiddenState& h, const Action& a) {
  require(static_cast<int>(a.size()) == m.action_dim, "predict: action dim mismatch");
  Tensor x = column(a);
  Tensor h_next = gru_cell_forward(gru_view(m.params, "predictor"), x, h.h);
  Tensor s_hat_n = decode_norm(m, h_next);

  PredictResult r;
  r.h.h = std::move(h_next);
  r.h.step = h.step + 1;
  r.h.grounded_at = h.grounded_at;
  r.s_hat = m.norm.invert(to_vec(s_hat_n));
  return r;
}

std::vector<EnvState> rollout_open_loop(const SelfModel& m, const EnvState& s0,
                                        const std::vector<Action>& actions) {
  std::vector<EnvState> out;
  out.reserve(actions.size());
  CorrectResult ground = correct(m, nullptr, s0);
  HiddenState h = ground.h;
  for (const Action& a : actions) {
    PredictResult p = predict(m, h, a);
    out.push_back(p.s_hat);
    h = std::move(p.h);
  }
  return out;
}

HiddenState reground(const SelfModel& m, const HiddenState& h, const EnvState& s_observed) {
  return correct(m, &h, s_observed).h;
}

Window materialize_window(const Dataset& ds, const WindowRef& ref, std::size_t n) {
  const Episode& ep = ds.episodes[ref.episode];
  Window w;
  w.s0 = ep[ref.start].s;
  w.actions.reserve(n);
  w.targets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.actions.push_back(ep[ref.start + i].a);
    w.targets.push_back(ep[ref.start + i].s_next);
  }
  return w;
}

LossBreakdown compute_losses(const SelfModel& m, const Window& window) {
  std::size_t n = window.actions.size();
  require(n >= 1, "compute_losses: empty window");
  require(window.targets.size() == n, "compute_losses: actions/targets length mismatch");

  std::vector<double> s0n = m.norm.apply(window.s0);
  Tensor h = gru_cell_forward(gru_view(m.params, "corrector"), column(s0n), null_hidden(m));
  double l_recon = mse(to_vec(decode_norm(m, h)), s0n);

  GruParams pred = gru_view(m.params, "predictor");
  double l_seq_sum = 0.0;
  double l_single = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    h = gru_cell_forward(pred, column(window.actions[i]), h);
    double term = mse(to_vec(decode_norm(m, h)), m.norm.apply(window.targets[i]));
    if (i == 0) l_single = term;
    l_seq_sum += term;
  }
  LossBreakdown lb;
  lb.l_recon = l_recon;
  lb.l_single = l_single;
  lb.l_seq = l_seq_sum / static_cast<double>(n);
  lb.total = m.config.w_recon * lb.l_recon + m.config.w_single * lb.l_single +
             m.config.w_seq * lb.l_seq;
  return lb;
}

WindowBatch make_window_batch(const SelfModel& m, const std::vector<Window>& ws) {
  require(!ws.empty(), "make_window_batch: empty batch");
  std::size_t batch = ws.size();
  std::size_t n = ws[0].actions.size();
  std::size_t sd = static_cast<std::size_t>(m.state_dim);
  std::size_t ad = static_cast<std::size_t>(m.action_dim);

  WindowBatch b;
  b.batch = batch;
  b.n = n;
  b.s0n = Tensor::zeros({sd, batch});
  for (std::size_t j = 0; j < batch; ++j) {
    require(ws[j].actions.size() == n, "make_window_batch: ragged windows");
    std::vector<double> s0n = m.norm.apply(ws[j].s0);
    for (std::size_t r = 0; r < sd; ++r) b.s0n(r, j) = s0n[r];
  }
  b.actions.reserve(n);
  b.targets_n.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor a = Tensor::zeros({ad, batch});
    Tensor t = Tensor::zeros({sd, batch});
    for (std::size_t j = 0; j < batch; ++j) {
      for (std::size_t r = 0; r < ad; ++r) a(r, j) = ws[j].actions[i][r];
      std::vector<double> tn = m.norm.apply(ws[j].targets[i]);
      for (std::size_t r = 0; r < sd; ++r) t(r, j) = tn[r];
    }
    b.actions.push_back(std::move(a));
    b.targets_n.push_back(std::move(t));
  }
  return b;
}

LossNodes build_loss_graph(Tape& t, const SelfModel& m, const WindowBatch& b) {
  Tape::GruNodes corr = t.gru_params("corrector");
  Tape::GruNodes pred = t.gru_params("predictor");
  int dw1 = t.param("decoder.W1");
  int db1 = t.param("decoder.b1");
  int dw2 = t.param("decoder.W2");
  int db2 = t.param("decoder.b2");
  auto decode = [&](int h) {
    return t.add_bias(t.matmul(dw2, t.tanh_(t.add_bias(t.matmul(dw1, h), db1))), db2);
  };
  auto mse_node = [&](int pred_n, int target) {
    int d = t.sub(pred_n, target);
    return t.mean_all(t.mul(d, d));
  };

  int s0 = t.constant(b.s0n);
  int h0 = t.constant(
      Tensor::zeros({static_cast<std::size_t>(m.config.hidden_size), b.batch}));
  int h = t.gru_cell(corr, s0, h0);

  LossNodes out;
  out.l_recon = mse_node(decode(h), s0);
  int l_seq_sum = -1;
  for (std::size_t i = 0; i < b.n; ++i) {
    int a = t.constant(b.actions[i]);
    h = t.gru_cell(pred, a, h);
    int term = mse_node(decode(h), t.constant(b.targets_n[i]));
    if (i == 0) out.l_single = term;
    l_seq_sum = (l_seq_sum < 0) ? term : t.add(l_seq_sum, term);
  }
  out.l_seq = t.affine(l_seq_sum, 1.0 / static_cast<double>(b.n), 0.0);
  out.total = t.add(t.add(t.affine(out.l_recon, m.config.w_recon, 0.0),
                          t.affine(out.l_single, m.config.w_single, 0.0)),
                    t.affine(out.l_seq, m.config.w_seq, 0.0));
  return out;
}

namespace {

// open-loop rollout in normalized space, recording MSE at requested steps
void rollout_window_mse(const SelfModel& m, const Window& w,
                        const std::vector<int>& horizons, std::vector<double>& acc) {
  std::vector<double> s0n = m.norm.apply(w.s0);
  Tensor h = gru_cell_forward(gru_view(m.params, "corrector"), column(s0n), null_hidden(m));
  GruParams pred = gru_view(m.params, "predictor");
  for (std::size_t i = 0; i < w.actions.size(); ++i) {
    h = gru_cell_forward(pred, column(w.actions[i]), h);
    int step = static_cast<int>(i) + 1;
    auto it = std::find(horizons.begin(), horizons.end(), step);
    if (it != horizons.end()) {
      double e = mse(to_vec(decode_norm(m, h)), m.norm.apply(w.targets[i]));
      acc[static_cast<std::size_t>(it - horizons.begin())] += e;
    }
  }
}

HorizonMse horizons_impl(const SelfModel& m, const Dataset& val_ds,
                         const std::vector<int>& horizons, bool persistence) {
  require(!horizons.empty(), "evaluate_horizons: no horizons given");
  HorizonMse out;
  int h_max = 0;
  std::size_t longest = 0;
  for (const auto& ep : val_ds.episodes) longest = std::max(longest, ep.size());
  std::vector<int> covered;
  for (int h : horizons) {
    require(h >= 1, "evaluate_horizons: horizons must be >= 1");
    if (static_cast<std::size_t>(h) <= longest) {
      covered.push_back(h);
      h_max = std::max(h_max, h);
    } else {
      out.skipped.push_back(h);
    }
  }
  if (covered.empty()) return out;

  WindowSet ws = extract_sequences(val_ds, static_cast<std::size_t>(h_max),
                                   static_cast<std::size_t>(m.config.window_stride));
  std::vector<double> acc(covered.size(), 0.0);
  for (const WindowRef& ref : ws.windows) {
    Window w = materialize_window(val_ds, ref, static_cast<std::size_t>(h_max));
    if (persistence) {
      std::vector<double> s0n = m.norm.apply(w.s0);
      for (std::size_t k = 0; k < covered.size(); ++k) {
        const EnvState& target = w.targets[static_cast<std::size_t>(covered[k]) - 1];
        acc[k] += mse(s0n, m.norm.apply(target));
      }
    } else {
      rollout_window_mse(m, w, covered, acc);
    }
  }
  out.windows_evaluated = ws.windows.size();
  if (ws.windows.empty()) {
    for (int h : covered) out.skipped.push_back(h);
    return out;
  }
  for (std::size_t k = 0; k < covered.size(); ++k)
    out.mse[covered[k]] = acc[k] / static_cast<double>(ws.windows.size());
  return out;
}

}  // namespace

HorizonMse evaluate_horizons(const SelfModel& m, const Dataset& val_ds,
                             const std::vector<int>& horizons) {
  return horizons_impl(m, val_ds, horizons, false);
}

HorizonMse persistence_horizons(const SelfModel& m, const Dataset& val_ds,
                                const std::vector<int>& horizons) {
  return horizons_impl(m, val_ds, horizons, true);
}

TrainHistory train_self_model(SelfModel& m, const Dataset& train_ds, const Dataset& val_ds,
                              std::uint64_t seed) {
  const SelfModelConfig& cfg = m.config;
  WindowSet ws = extract_sequences(train_ds, static_cast<std::size_t>(cfg.n),
                                   static_cast<std::size_t>(cfg.window_stride));
  require(!ws.windows.empty(), "train_self_model: no training windows of length n=" +
                                   std::to_string(cfg.n));

  TrainHistory hist;
  hist.train_windows = ws.windows.size();
  hist.window_stride = static_cast<std::size_t>(cfg.window_stride);

  Rng rng(derive_seed(seed, "selfmodel/train"));
  AdamState adam;
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.learning_rate;

  std::vector<std::size_t> order(ws.windows.size());
  std::iota(order.begin(), order.end(), 0);

  ParamStore best = m.params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    LossBreakdown epoch_mean;
    std::size_t seen = 0;

    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - pos);
      std::vector<Window> batch;
      batch.reserve(bsz);
      for (std::size_t j = 0; j < bsz; ++j)
        batch.push_back(materialize_window(train_ds, ws.windows[order[pos + j]],
                                           static_cast<std::size_t>(cfg.n)));
      WindowBatch wb = make_window_batch(m, batch);
      Tape tape(&m.params);
      LossNodes nodes = build_loss_graph(tape, m, wb);
      double total = tape.scalar(nodes.total);
      if (!std::isfinite(total)) {
        std::ostringstream msg;
        msg << "train_self_model: non-finite loss at epoch " << epoch << ", batch "
            << (pos / static_cast<std::size_t>(cfg.batch_size));
        throw std::runtime_error(msg.str());
      }
      tape.backward(nodes.total);
      m.params.clip_grad_norm(cfg.grad_clip);
      adam_step(m.params, adam, adam_cfg);

      double w = static_cast<double>(bsz);
      epoch_mean.l_recon += w * tape.scalar(nodes.l_recon);
      epoch_mean.l_single += w * tape.scalar(nodes.l_single);
      epoch_mean.l_seq += w * tape.scalar(nodes.l_seq);
      epoch_mean.total += w * total;
      seen += bsz;
    }
    double inv = 1.0 / static_cast<double>(seen);
    epoch_mean.l_recon *= inv;
    epoch_mean.l_single *= inv;
    epoch_mean.l_seq *= inv;
    epoch_mean.total *= inv;

    HorizonMse val = evaluate_horizons(m, val_ds, {1, 10, 100});
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = epoch_mean;
    rec.val_mse_h1 = val.mse.count(1) ? val.mse.at(1) : std::nan("");
    rec.val_mse_h10 = val.mse.count(10) ? val.mse.at(10) : std::nan("");
    rec.val_mse_h100 = val.mse.count(100) ? val.mse.at(100) : std::nan("");
    rec.val_l_single = rec.val_mse_h1;
    hist.val_windows = val.windows_evaluated;
    hist.epochs.push_back(rec);

    if (std::isfinite(rec.val_l_single) && rec.val_l_single < best_val) {
      best_val = rec.val_l_single;
      best = m.params;
      best_epoch = epoch;
      bad_epochs = 0;
    } else {
      bad_epochs += 1;
      if (bad_epochs > cfg.patience) break;
    }
  }

  m.params = std::move(best);
  hist.best_epoch = best_epoch;
  return hist;
}

namespace {
constexpr char kModelMagic[4] = {'S', 'M', 'M', '1'};
}

void save_model(const SelfModel& m, const std::string& path) {
  json header;
  header["state_dim"] = m.state_dim;
  header["action_dim"] = m.action_dim;
  json cfg;
  cfg["hidden_size"] = m.config.hidden_size;
  cfg["decoder_hidden"] = m.config.decoder_hidden;
  cfg["n"] = m.config.n;
  cfg["learning_rate"] = m.config.learning_rate;
  cfg["batch_size"] = m.config.batch_size;
  cfg["max_epochs"] = m.config.max_epochs;
  cfg["patience"] = m.config.patience;
  cfg["w_recon"] = m.config.w_recon;
  cfg["w_single"] = m.config.w_single;
  cfg["w_seq"] = m.config.w_seq;
  cfg["window_stride"] = m.config.window_stride;
  cfg["grad_clip"] = m.config.grad_clip;
  header["config"] = cfg;
  header["norm_mean"] = m.norm.mean;
  header["norm_stddev"] = m.norm.stddev;
  json plist = json::array();
  for (const auto& [name, e] : m.params) {
    json p;
    p["name"] = name;
    p["shape"] = e.value.shape;
    plist.push_back(p);
  }
  header["params"] = plist;
  std::string hs = header.dump();

  std::ofstream os = open_out(path);
  write_bytes(os, kModelMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(hs.size()));
  write_bytes(os, hs.data(), hs.size());
  for (const auto& [name, e] : m.params)
    write_f64_array(os, e.value.data.data(), e.value.numel());
  if (!os) throw std::runtime_error("save_model: write failed: " + path);
}

SelfModel load_model(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, kModelMagic, "SMM1");
  std::uint32_t hlen = read_u32(is, "header length");
  std::string hs(hlen, '\0');
  read_bytes(is, hs.data(), hlen, "JSON header");

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      std::string("SMM1 header is not valid JSON: ") + e.what());
  }

  SelfModel m;
  try {
    m.state_dim = header.at("state_dim").get<int>();
    m.action_dim = header.at("action_dim").get<int>();
    const json& cfg = header.at("config");
    m.config.hidden_size = cfg.at("hidden_size").get<int>();
    m.config.decoder_hidden = cfg.at("decoder_hidden").get<int>();
    m.config.n = cfg.at("n").get<int>();
    m.config.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.batch_size = cfg.at("batch_size").get<int>();
    m.config.max_epochs = cfg.at("max_epochs").get<int>();
    m.config.patience = cfg.at("patience").get<int>();
    m.config.w_recon = cfg.at("w_recon").get<double>();
    m.config.w_single = cfg.at("w_single").get<double>();
    m.config.w_seq = cfg.at("w_seq").get<double>();
    m.config.window_stride = cfg.at("window_stride").get<int>();
    m.config.grad_clip = cfg.at("grad_clip").get<double>();
    m.norm.mean = header.at("norm_mean").get<std::vector<double>>();
    m.norm.stddev = header.at("norm_stddev").get<std::vector<double>>();
    if (static_cast<int>(m.norm.mean.size()) != m.state_dim)
      throw FormatError(FormatError::Kind::kDimMismatch,
                        "SMM1 normalization stats disagree with state_dim");
    for (const json& p : header.at("params")) {
      std::string name = p.at("name").get<std::string>();
      std::vector<std::size_t> shape = p.at("shape").get<std::vector<std::size_t>>();
      Tensor t = Tensor::zeros(shape);
      read_bytes(is, t.data.data(), t.numel() * 8, "parameter payload");
      m.params.add(name, std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      std::string("SMM1 header missing fields: ") + e.what());
  }
  return m;
}

void write_history_csv(const TrainHistory& h, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_history_csv: cannot open " + path);
  os << "epoch,l_recon,l_single,l_seq,val_mse_h1,val_mse_h10,val_mse_h100\n";
  os.precision(17);
  for (const EpochRecord& r : h.epochs)
    os << r.epoch << "," << r.train.l_recon << "," << r.train.l_single << ","
       << r.train.l_seq << "," << r.val_mse_h1 << "," << r.val_mse_h10 << ","
       << r.val_mse_h100 << "\n";
}

}  // namespace smrl

#include "smrl/policy.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "smrl/serialize.hpp"

namespace smrl {

using nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

Tensor column(const std::vector<double>& v) {
  Tensor t = Tensor::zeros({v.size(), 1});
  t.data.assign(v.begin(), v.end());
  return t;
}

Tensor mlp2(const ParamStore& ps, const std::string& prefix, const Tensor& x) {
  Tensor h1 = dense_forward(ps.value(prefix + ".l1.W"), ps.value(prefix + ".l1.b"), x);
  for (double& v : h1.data) v = std::tanh(v);
  Tensor h2 = dense_forward(ps.value(prefix + ".l2.W"), ps.value(prefix + ".l2.b"), h1);
  for (double& v : h2.data) v = std::tanh(v);
  return h2;
}

Tensor policy_mean_raw(const Policy& p, const EnvState& s) {
  Tensor h = mlp2(p.params, "pi", column(s));
  return dense_forward(p.params.value("pi.mean.W"), p.params.value("pi.mean.b"), h);
}

double clamped_log_std(const Policy& p, std::size_t i) {
  double ls = p.params.value("pi.log_std")[i];
  return ls < kLogStdMin ? kLogStdMin : (ls > kLogStdMax ? kLogStdMax : ls);
}

}  // namespace

Policy make_policy(int obs_dim, int act_dim, std::uint64_t seed) {
  Policy p;
  p.obs_dim = obs_dim;
  p.act_dim = act_dim;
  Rng rng(derive_seed(seed, "policy/init"));
  std::size_t h = static_cast<std::size_t>(p.hidden);
  std::size_t od = static_cast<std::size_t>(obs_dim);
  std::size_t ad = static_cast<std::size_t>(act_dim);
  p.params.add("pi.l1.W", init_weight(h, od, rng));
  p.params.add("pi.l1.b", Tensor::zeros({h, 1}));
  p.params.add("pi.l2.W", init_weight(h, h, rng));
  p.params.add("pi.l2.b", Tensor::zeros({h, 1}));
  // small mean head so a fresh policy acts near zero
  p.params.add("pi.mean.W", init_weight(ad, h, rng, 0.01));
  p.params.add("pi.mean.b", Tensor::zeros({ad, 1}));
  p.params.add("pi.log_std", Tensor::zeros({ad, 1}));
  return p;
}

ValueFn make_value(int obs_dim, std::uint64_t seed) {
  ValueFn v;
  v.obs_dim = obs_dim;
  Rng rng(derive_seed(seed, "value/init"));
  std::size_t h = static_cast<std::size_t>(v.hidden);
  std::size_t od = static_cast<std::size_t>(obs_dim);
  v.params.add("v.l1.W", init_weight(h, od, rng));
  v.params.add("v.l1.b", Tensor::zeros({h, 1}));
  v.params.add("v.l2.W", init_weight(h, h, rng));
  v.params.add("v.l2.b", Tensor::zeros({h, 1}));
  v.params.add("v.out.W", init_weight(1, h, rng));
  v.params.add("v.out.b", Tensor::zeros({1, 1}));
  return v;
}

ActSample policy_act(const Policy& p, const EnvState& s, Rng& rng) {
  Tensor mean = policy_mean_raw(p, s);
  ActSample out;
  out.u.resize(mean.numel());
  out.a.resize(mean.numel());
  double logp = 0.0;
  for (std::size_t i = 0; i < mean.numel(); ++i) {
    double ls = clamped_log_std(p, i);
    double sigma = std::exp(ls);
    double u = mean[i] + sigma * rng.normal();
    double t = std::tanh(u);
    double z = (u - mean[i]) / sigma;
    logp += -0.5 * z * z - ls - 0.5 * kLog2Pi;
    logp -= std::log(1.0 - t * t + kSquashEps);
    out.u[i] = u;
    out.a[i] = t;
  }
  out.logp = logp;
  return out;
}

Action policy_mean(const Policy& p, const EnvState& s) {
  Tensor mean = policy_mean_raw(p, s);
  Action a(mean.numel());
  for (std::size_t i = 0; i < mean.numel(); ++i) a[i] = std::tanh(mean[i]);
  return a;
}

double policy_logp(const Policy& p, const EnvState& s, const std::vector<double>& u) {
  Tensor mean = policy_mean_raw(p, s);
  double logp = 0.0;
  for (std::size_t i = 0; i < mean.numel(); ++i) {
    double ls = clamped_log_std(p, i);
    double sigma = std::exp(ls);
    double t = std::tanh(u[i]);
    double z = (u[i] - mean[i]) / sigma;
    logp += -0.5 * z * z - ls - 0.5 * kLog2Pi;
    logp -= std::log(1.0 - t * t + kSquashEps);
  }
  return logp;
}

double value_eval(const ValueFn& v, const EnvState& s) {
  Tensor h = mlp2(v.params, "v", column(s));
  Tensor out = dense_forward(v.params.value("v.out.W"), v.params.value("v.out.b"), h);
  return out[0];
}

double policy_entropy(const Policy& p) {
  double e = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(p.act_dim); ++i)
    e += clamped_log_std(p, i) + 0.5 * (1.0 + kLog2Pi);
  return e;
}

namespace {
constexpr char kPolicyMagic[4] = {'S', 'M', 'P', '1'};

json param_list(const ParamStore& ps) {
  json list = json::array();
  for (const auto& [name, e] : ps) {
    json p;
    p["name"] = name;
    p["shape"] = e.value.shape;
    list.push_back(p);
  }
  return list;
}

void read_params(std::istream& is, ParamStore& ps, const json& list) {
  for (const json& p : list) {
    std::string name = p.at("name").get<std::string>();
    Tensor t = Tensor::zeros(p.at("shape").get<std::vector<std::size_t>>());
    read_bytes(is, t.data.data(), t.numel() * 8, "parameter payload");
    ps.add(name, std::move(t));
  }
}
}  // namespace

void save_policy(const Policy& p, const ValueFn& v, const std::string& path) {
  json header;
  header["obs_dim"] = p.obs_dim;
  header["act_dim"] = p.act_dim;
  header["hidden"] = p.hidden;
  header["policy_params"] = param_list(p.params);
  header["value_params"] = param_list(v.params);
  std::string hs = header.dump();

  std::ofstream os = open_out(path);
  write_bytes(os, kPolicyMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(hs.size()));
  write_bytes(os, hs.data(), hs.size());
  for (const auto& [name, e] : p.params)
    write_f64_array(os, e.value.data.data(), e.value.numel());
  for (const auto& [name, e] : v.params)
    write_f64_array(os, e.value.data.data(), e.value.numel());
  if (!os) throw std::runtime_error("save_policy: write failed: " + path);
}

PolicyCheckpoint load_policy(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, kPolicyMagic, "SMP1");
  std::uint32_t hlen = read_u32(is, "header length");
  std::string hs(hlen, '\0');
  read_bytes(is, hs.data(), hlen, "JSON header");

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      std::string("SMP1 header is not valid JSON: ") + e.what());
  }

  PolicyCheckpoint ck;
  try {
    ck.policy.obs_dim = header.at("obs_dim").get<int>();
    ck.policy.act_dim = header.at("act_dim").get<int>();
    ck.policy.hidden = header.at("hidden").get<int>();
    ck.value.obs_dim = ck.policy.obs_dim;
    ck.value.hidden = ck.policy.hidden;
    read_params(is, ck.policy.params, header.at("policy_params"));
    read_params(is, ck.value.params, header.at("value_params"));
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      std::string("SMP1 header missing fields: ") + e.what());
  }
  return ck;
}

}  // namespace smrl

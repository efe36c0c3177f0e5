#include "smrl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smrl/rng.hpp"
#include "smrl/serialize.hpp"
#include "smrl/tensor.hpp"

namespace smrl {

using nlohmann::json;

std::vector<double> NormStats::apply(const std::vector<double>& s) const {
  std::vector<double> z(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) z[i] = (s[i] - mean[i]) / stddev[i];
  return z;
}

std::vector<double> NormStats::invert(const std::vector<double>& z) const {
  std::vector<double> s(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) s[i] = z[i] * stddev[i] + mean[i];
  return s;
}

Dataset collect_random(const EnvDescriptor& desc, std::size_t num_transitions,
                       std::size_t episode_len, std::uint64_t seed, StepCounter* counter) {
  require(num_transitions >= 1, "collect_random: need at least one transition");
  require(episode_len >= 1, "collect_random: episode_len must be >= 1");

  Dataset ds;
  ds.descriptor = desc;
  ds.seed = seed;
  Rng action_rng(derive_seed(seed, "collect/actions"));
  Rng reset_rng(derive_seed(seed, "collect/resets"));

  std::size_t remaining = num_transitions;
  while (remaining > 0) {
    std::size_t len = std::min(remaining, episode_len);
    Episode ep;
    ep.reserve(len);
    EnvState s = env_reset(desc, reset_rng.next_u64());
    if (counter) counter->resets += 1;
    for (std::size_t t = 0; t < len; ++t) {
      Action a(static_cast<std::size_t>(desc.action_dim));
      for (double& x : a) x = action_rng.uniform(-1.0, 1.0);
      EnvState s_next = env_step(desc, s, a);
      if (counter) counter->steps += 1;
      ep.push_back({s, a, s_next});
      s = s_next;
    }
    ds.episodes.push_back(std::move(ep));
    remaining -= len;
  }
  return ds;
}

WindowSet extract_sequences(const Dataset& ds, std::size_t n, std::size_t stride) {
  require(n >= 1, "extract_sequences: n must be >= 1");
  require(stride >= 1, "extract_sequences: stride must be >= 1");
  WindowSet out;
  out.n = n;
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    std::size_t len = ds.episodes[e].size();
    if (len < n) {
      out.skipped_episodes += 1;
      continue;
    }
    for (std::size_t start = 0; start + n <= len; start += stride)
      out.windows.push_back({e, start});
  }
  return out;
}

SplitResult split(const Dataset& ds, std::size_t n_train, std::size_t n_val,
                  std::uint64_t seed) {
  std::size_t total = ds.total_transitions();
  if (n_train + n_val > total) {
    std::ostringstream msg;
    msg << "split: requested " << n_train << "+" << n_val << " transitions but dataset has "
        << total << " (short by " << (n_train + n_val - total) << ")";
    throw std::invalid_argument(msg.str());
  }

  SplitResult r;
  r.train.descriptor = ds.descriptor;
  r.train.seed = ds.seed;
  r.val.descriptor = ds.descriptor;
  r.val.seed = ds.seed;

  std::vector<std::size_t> order(ds.episodes.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);

  std::vector<bool> in_val(ds.episodes.size(), false);
  std::size_t val_count = 0;
  for (std::size_t idx : order) {
    if (val_count >= n_val) break;
    in_val[idx] = true;
    val_count += ds.episodes[idx].size();
  }

  std::size_t train_count = 0;
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    if (in_val[e])
      r.val.episodes.push_back(ds.episodes[e]);
    else {
      r.train.episodes.push_back(ds.episodes[e]);
      train_count += ds.episodes[e].size();
    }
  }
  if (train_count < n_train) {
    std::ostringstream msg;
    msg << "split: training side ended up with " << train_count << " transitions, needed "
        << n_train << " (short by " << (n_train - train_count)
        << "; validation consumed whole episodes)";
    throw std::invalid_argument(msg.str());
  }
  return r;
}

NormStats compute_norm_stats(const Dataset& ds) {
  require(ds.total_transitions() > 0, "compute_norm_stats: empty dataset");
  std::size_t dim = static_cast<std::size_t>(ds.descriptor.state_dim);
  std::vector<double> sum(dim, 0.0), sumsq(dim, 0.0);
  std::size_t count = 0;

  // every distinct state in the dataset: each s, plus the final s_next of
  // each episode (interior s_next values coincide with the next s)
  auto accumulate = [&](const EnvState& s) {
    for (std::size_t i = 0; i < dim; ++i) {
      sum[i] += s[i];
      sumsq[i] += s[i] * s[i];
    }
    ++count;
  };
  for (const auto& ep : ds.episodes) {
    for (const auto& tr : ep) accumulate(tr.s);
    if (!ep.empty()) accumulate(ep.back().s_next);
  }

  NormStats st;
  st.mean.resize(dim);
  st.stddev.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    st.mean[i] = sum[i] / static_cast<double>(count);
    double var = sumsq[i] / static_cast<double>(count) - st.mean[i] * st.mean[i];
    st.stddev[i] = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
  }
  return st;
}

namespace {
constexpr char kDatasetMagic[4] = {'S', 'M', 'D', '1'};
}

void save_dataset(const Dataset& ds, const std::string& path) {
  json header;
  header["env_id"] = env_name(ds.descriptor.id);
  header["state_dim"] = ds.descriptor.state_dim;
  header["action_dim"] = ds.descriptor.action_dim;
  header["dt"] = ds.descriptor.dt;
  header["seed"] = ds.seed;
  std::vector<std::size_t> lengths;
  for (const auto& ep : ds.episodes) lengths.push_back(ep.size());
  header["episode_lengths"] = lengths;
  std::string hs = header.dump();

  std::ofstream os = open_out(path);
  write_bytes(os, kDatasetMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(hs.size()));
  write_bytes(os, hs.data(), hs.size());
  for (const auto& ep : ds.episodes)
    for (const auto& tr : ep) {
      write_f64_array(os, tr.s.data(), tr.s.size());
      write_f64_array(os, tr.a.data(), tr.a.size());
      write_f64_array(os, tr.s_next.data(), tr.s_next.size());
    }
  if (!os) throw std::runtime_error("save_dataset: write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, kDatasetMagic, "SMD1");
  std::uint32_t hlen = read_u32(is, "header length");
  std::string hs(hlen, '\0');
  read_bytes(is, hs.data(), hlen, "JSON header");

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      std::string("SMD1 header is not valid JSON: ") + e.what());
  }

  Dataset ds;
  try {
    ds.descriptor = make_descriptor(env_from_name(header.at("env_id").get<std::string>()));
    ds.seed = header.at("seed").get<std::uint64_t>();
    int sd = header.at("state_dim").get<int>();
    int ad = header.at("action_dim").get<int>();
    if (sd != ds.descriptor.state_dim || ad != ds.descriptor.action_dim)
      throw FormatError(FormatError::Kind::kDimMismatch,
                        "SMD1 header dims disagree with environment '" +
                            env_name(ds.descriptor.id) + "'");
    std::vector<std::size_t> lengths = header.at("episode_lengths").get<std::vector<std::size_t>>();
    std::size_t sdim = static_cast<std::size_t>(sd);
    std::size_t adim = static_cast<std::size_t>(ad);
    for (std::size_t len : lengths) {
      Episode ep;
      ep.reserve(len);
      for (std::size_t t = 0; t < len; ++t) {
        Transition tr;
        tr.s.resize(sdim);
        tr.a.resize(adim);
        tr.s_next.resize(sdim);
        read_bytes(is, tr.s.data(), sdim * 8, "state payload");
        read_bytes(is, tr.a.data(), adim * 8, "action payload");
        read_bytes(is, tr.s_next.data(), sdim * 8, "next-state payload");
        ep.push_back(std::move(tr));
      }
      ds.episodes.push_back(std::move(ep));
    }
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      std::string("SMD1 header missing fields: ") + e.what());
  }
  return ds;
}

void export_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("export_csv: cannot open " + path);
  os << "episode,step";
  for (int i = 0; i < ds.descriptor.state_dim; ++i) os << ",s" << i;
  for (int i = 0; i < ds.descriptor.action_dim; ++i) os << ",a" << i;
  for (int i = 0; i < ds.descriptor.state_dim; ++i) os << ",s_next" << i;
  os << "\n";
  os.precision(17);
  for (std::size_t e = 0; e < ds.episodes.size(); ++e)
    for (std::size_t t = 0; t < ds.episodes[e].size(); ++t) {
      const Transition& tr = ds.episodes[e][t];
      os << e << "," << t;
      for (double v : tr.s) os << "," << v;
      for (double v : tr.a) os << "," << v;
      for (double v : tr.s_next) os << "," << v;
      os << "\n";
    }
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.descriptor.id != b.descriptor.id || a.seed != b.seed) return false;
  if (a.episodes.size() != b.episodes.size()) return false;
  for (std::size_t e = 0; e < a.episodes.size(); ++e) {
    if (a.episodes[e].size() != b.episodes[e].size()) return false;
    for (std::size_t t = 0; t < a.episodes[e].size(); ++t) {
      const Transition& x = a.episodes[e][t];
      const Transition& y = b.episodes[e][t];
      if (x.s != y.s || x.a != y.a || x.s_next != y.s_next) return false;
    }
  }
  return true;
}

}  // namespace smrl

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "smrl/dataset.hpp"
#include "smrl/selfmodel.hpp"
#include "smrl/serialize.hpp"

using namespace smrl;

namespace {
std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("collect_random produces the requested transitions in episodes") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 450, 200, 9);
  CHECK(ds.total_transitions() == 450);
  CHECK(ds.episodes.size() == 3);
  CHECK(ds.episodes[0].size() == 200);
  CHECK(ds.episodes[2].size() == 50);  // last episode short

  Dataset one = collect_random(d, 1, 200, 9);
  CHECK(one.episodes.size() == 1);
  CHECK(one.episodes[0].size() == 1);
}

TEST_CASE("collected actions are inside the normalized cube") {
  EnvDescriptor d = make_descriptor(EnvId::kPointHopper);
  Dataset ds = collect_random(d, 500, 100, 21);
  for (const auto& ep : ds.episodes)
    for (const auto& tr : ep)
      for (double a : tr.a) {
        CHECK(a >= -1.0);
        CHECK(a <= 1.0);
      }
}

TEST_CASE("collection is deterministic and counts real steps") {
  EnvDescriptor d = make_descriptor(EnvId::kCartpole);
  StepCounter c1, c2;
  Dataset a = collect_random(d, 300, 120, 77, &c1);
  Dataset b = collect_random(d, 300, 120, 77, &c2);
  CHECK(datasets_equal(a, b));
  CHECK(c1.steps == 300);
  CHECK(c1.resets == 3);
  CHECK(c2.steps == 300);
}

TEST_CASE("episodes are contiguous") {
  EnvDescriptor d = make_descriptor(EnvId::kPointHopper);
  Dataset ds = collect_random(d, 600, 150, 5);
  for (const auto& ep : ds.episodes)
    for (std::size_t i = 0; i + 1 < ep.size(); ++i) CHECK(ep[i].s_next == ep[i + 1].s);
}

TEST_CASE("window counting: 200-step episode, n=100, stride 1 gives 101 windows") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 200, 200, 3);
  WindowSet ws = extract_sequences(ds, 100, 1);
  CHECK(ws.windows.size() == 101);
  CHECK(ws.skipped_episodes == 0);
}

TEST_CASE("windows of length 1 are exactly single transitions") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 40, 20, 3);
  WindowSet ws = extract_sequences(ds, 1, 1);
  CHECK(ws.windows.size() == 40);
  Window w = materialize_window(ds, ws.windows[7], 1);
  const Transition& tr = ds.episodes[0][7];
  CHECK(w.s0 == tr.s);
  CHECK(w.actions[0] == tr.a);
  CHECK(w.targets[0] == tr.s_next);
}

TEST_CASE("short episodes are skipped with a count") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 250, 100, 3);  // episodes 100, 100, 50
  WindowSet ws = extract_sequences(ds, 80, 10);
  CHECK(ws.skipped_episodes == 1);
  for (const WindowRef& r : ws.windows) CHECK(ds.episodes[r.episode].size() >= 80);
}

TEST_CASE("windows never straddle episode boundaries") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 500, 100, 13);
  WindowSet ws = extract_sequences(ds, 30, 7);
  for (const WindowRef& r : ws.windows)
    CHECK(r.start + 30 <= ds.episodes[r.episode].size());
}

TEST_CASE("split assigns whole episodes, disjointly") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 1000, 100, 31);
  SplitResult sp = split(ds, 800, 200, 4);
  CHECK(sp.train.total_transitions() + sp.val.total_transitions() == 1000);
  CHECK(sp.val.total_transitions() >= 200);
  CHECK(sp.train.total_transitions() >= 800);
  // disjoint: first states of episodes must not repeat across sides
  for (const auto& ev : sp.val.episodes)
    for (const auto& et : sp.train.episodes) CHECK(ev[0].s != et[0].s);
}

TEST_CASE("split with zero validation returns the dataset unchanged") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 400, 100, 31);
  SplitResult sp = split(ds, 400, 0, 4);
  CHECK(sp.val.episodes.empty());
  CHECK(datasets_equal(sp.train, ds));
}

TEST_CASE("split reports the shortfall when asked for too much") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 100, 100, 31);
  try {
    split(ds, 90, 20, 4);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("short by 10") != std::string::npos);
  }
}

TEST_CASE("norm stats: constant dimension is floored, two-point case by hand") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds;
  ds.descriptor = d;
  Episode ep;
  // 1-D-style check embedded in dim 2 (thdot): states 0 and 2
  ep.push_back({{1.0, 0.0, 0.0}, {0.0}, {1.0, 0.0, 2.0}});
  ds.episodes.push_back(ep);
  NormStats st = compute_norm_stats(ds);
  // dims 0/1 constant -> std floored
  CHECK(st.stddev[0] == 1e-6);
  CHECK(st.mean[0] == 1.0);
  // dim 2: mean 1, std 1, normalized -1 / +1
  CHECK(st.mean[2] == 1.0);
  CHECK(st.stddev[2] == 1.0);
  CHECK(st.apply({1.0, 0.0, 0.0})[2] == -1.0);
  CHECK(st.apply({1.0, 0.0, 2.0})[2] == 1.0);
}

TEST_CASE("normalization round trip on random data") {
  EnvDescriptor d = make_descriptor(EnvId::kPointHopper);
  Dataset ds = collect_random(d, 2000, 200, 8);
  NormStats st = compute_norm_stats(ds);
  for (const auto& tr : ds.episodes[0]) {
    std::vector<double> back = st.invert(st.apply(tr.s));
    for (std::size_t i = 0; i < back.size(); ++i)
      CHECK(std::abs(back[i] - tr.s[i]) < 1e-10);
  }
}

TEST_CASE("SMD1 round trip is bit exact") {
  EnvDescriptor d = make_descriptor(EnvId::kPointHopper);
  Dataset ds = collect_random(d, 350, 100, 40);
  std::string path = tmp_path("roundtrip.smd");
  save_dataset(ds, path);
  Dataset loaded = load_dataset(path);
  CHECK(datasets_equal(ds, loaded));
  std::remove(path.c_str());
}

TEST_CASE("corrupted magic is a distinct error") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 10, 10, 2);
  std::string path = tmp_path("badmagic.smd");
  save_dataset(ds, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  try {
    load_dataset(path);
    FAIL("expected throw");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::kBadMagic);
  }
  std::remove(path.c_str());
}

TEST_CASE("empty and truncated files are truncation errors") {
  std::string path = tmp_path("empty.smd");
  {
    std::ofstream f(path, std::ios::binary);
  }
  try {
    load_dataset(path);
    FAIL("expected throw");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::kTruncated);
  }

  // valid file cut in the middle of the payload
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 20, 10, 2);
  save_dataset(ds, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 64);
  try {
    load_dataset(path);
    FAIL("expected throw");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::kTruncated);
  }
  std::remove(path.c_str());
}

TEST_CASE("saved bytes are identical for identical collection inputs") {
  EnvDescriptor d = make_descriptor(EnvId::kCartpole);
  std::string p1 = tmp_path("det1.smd"), p2 = tmp_path("det2.smd");
  save_dataset(collect_random(d, 200, 50, 123), p1);
  save_dataset(collect_random(d, 200, 50, 123), p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(!b1.empty());
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("csv export writes one row per transition") {
  EnvDescriptor d = make_descriptor(EnvId::kPendulum);
  Dataset ds = collect_random(d, 25, 10, 6);
  std::string path = tmp_path("export.csv");
  export_csv(ds, path);
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "episode,step,s0,s1,s2,a0,s_next0,s_next1,s_next2");
  int rows = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 25);
  std::remove(path.c_str());
}

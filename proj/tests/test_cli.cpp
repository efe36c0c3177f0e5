#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "smrl/dataset.hpp"
#include "smrl/selfmodel.hpp"

using namespace smrl;

namespace {

const std::string kCli = SMRL_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  std::string out_file =
      (std::filesystem::temp_directory_path() / "smrl_cli_out.txt").string();
  std::string cmd = kCli + " " + args + " >" + out_file + " 2>&1";
  int rc = std::system(cmd.c_str());
  std::ifstream f(out_file);
  std::string out{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  return {WEXITSTATUS(rc), out};
}

std::string work_dir() {
  std::string dir = (std::filesystem::temp_directory_path() / "smrl_cli_test").string();
  std::filesystem::create_directories(dir);
  return dir;
}

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("no arguments prints usage and exits 1") {
  RunResult r = run_cli("");
  CHECK(r.exit_code == 1);
  CHECK(r.out.find("Usage") != std::string::npos);
}

TEST_CASE("unknown subcommand and unknown flags exit 1") {
  CHECK(run_cli("frobnicate").exit_code == 1);
  CHECK(run_cli("collect --nonsense 3").exit_code == 1);
}

TEST_CASE("help lists every subcommand and per-command flags with defaults") {
  RunResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  for (const char* sub : {"collect", "train-model", "eval-model", "train-policy",
                          "eval-policy", "benchmark", "transfer", "report"})
    CHECK(r.out.find(sub) != std::string::npos);

  RunResult rc = run_cli("collect --help");
  CHECK(rc.exit_code == 0);
  CHECK(rc.out.find("--episode-len") != std::string::npos);
  CHECK(rc.out.find("200") != std::string::npos);  // default shown
}

TEST_CASE("collect writes a loadable SMD1 file of the requested size") {
  std::string dir = work_dir();
  std::string ds_path = dir + "/tiny.smd";
  RunResult r =
      run_cli("collect --env pendulum --steps 300 --episode-len 100 --seed 7 --out " +
              ds_path);
  CHECK(r.exit_code == 0);
  Dataset ds = load_dataset(ds_path);
  CHECK(ds.total_transitions() == 300);
  CHECK(ds.episodes.size() == 3);
}

TEST_CASE("collect is rerunnable to byte-identical output") {
  std::string dir = work_dir();
  std::string p1 = dir + "/det_a.smd", p2 = dir + "/det_b.smd";
  CHECK(run_cli("collect --env point_hopper --steps 150 --episode-len 50 --seed 3 --out " +
                p1)
            .exit_code == 0);
  CHECK(run_cli("collect --env point_hopper --steps 150 --episode-len 50 --seed 3 --out " +
                p2)
            .exit_code == 0);
  CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("collect with a bad environment exits 2") {
  RunResult r = run_cli("collect --env marsrover --steps 10 --out /tmp/x.smd");
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("unknown environment") != std::string::npos);
}

TEST_CASE("train-model then eval-model and train-policy round trip through files") {
  std::string dir = work_dir();
  std::string cfg_path = dir + "/tiny_cfg.json";
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({"selfmodel":{"hidden_size":10,"decoder_hidden":10,"n":10,
                "window_stride":10,"max_epochs":2,"batch_size":16},
               "ppo":{"steps_per_batch":128,"minibatch_size":64,"update_epochs":2,
                "horizon":25,"eval_episodes":2,"total_steps":128}})";
  }
  std::string ds_path = dir + "/train.smd";
  std::string model_path = dir + "/model.smm";
  std::string policy_path = dir + "/policy.smp";

  CHECK(run_cli("collect --env pendulum --steps 600 --episode-len 60 --seed 5 --out " +
                ds_path)
            .exit_code == 0);
  RunResult tm = run_cli("train-model --dataset " + ds_path + " --config " + cfg_path +
                         " --seed 11 --out " + model_path);
  CHECK(tm.exit_code == 0);
  CHECK(std::filesystem::exists(model_path));
  CHECK(std::filesystem::exists(model_path + ".history.csv"));

  RunResult em = run_cli("eval-model --model " + model_path + " --dataset " + ds_path +
                         " --horizons 1,10");
  CHECK(em.exit_code == 0);
  CHECK(em.out.find("horizon,model_mse,persistence_mse") != std::string::npos);

  RunResult tp = run_cli("train-policy --model " + model_path + " --dataset " + ds_path +
                         " --task pendulum --config " + cfg_path + " --seed 2 --out " +
                         policy_path);
  CHECK(tp.exit_code == 0);
  CHECK(std::filesystem::exists(policy_path));

  RunResult ep = run_cli("eval-policy --policy " + policy_path +
                         " --env pendulum --task pendulum --episodes 2 --seed 4");
  CHECK(ep.exit_code == 0);
  CHECK(ep.out.find("return_mean") != std::string::npos);
}

TEST_CASE("train-model reruns produce byte-identical SMM1 files") {
  std::string dir = work_dir();
  std::string cfg_path = dir + "/det_cfg.json";
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({"selfmodel":{"hidden_size":8,"decoder_hidden":8,"n":10,
                "window_stride":10,"max_epochs":2,"batch_size":16}})";
  }
  std::string ds_path = dir + "/det.smd";
  CHECK(run_cli("collect --env pendulum --steps 400 --episode-len 40 --seed 13 --out " +
                ds_path)
            .exit_code == 0);
  std::string m1 = dir + "/det_a.smm", m2 = dir + "/det_b.smm";
  CHECK(run_cli("train-model --dataset " + ds_path + " --config " + cfg_path +
                " --seed 17 --out " + m1)
            .exit_code == 0);
  CHECK(run_cli("train-model --dataset " + ds_path + " --config " + cfg_path +
                " --seed 17 --out " + m2)
            .exit_code == 0);
  CHECK(file_bytes(m1) == file_bytes(m2));
}

TEST_CASE("report re-emits records from a benchmark-style directory") {
  std::string dir = work_dir();
  std::string in_dir = dir + "/report_in", out_dir = dir + "/report_out";
  std::filesystem::create_directories(in_dir);
  {
    std::ofstream f(in_dir + "/records.csv");
    f << "method,budget,seed,real_transitions_used,eval_real_steps,"
         "eval_return_mean,eval_return_std,aux_max_z,aux_x_disp\n";
    f << "baseline_ppo,100,1,100,40,-900.5,12.25,0,0\n";
    f << "selfmodel_ppo,50,1,50,40,-850,10,0,0\n";
  }
  RunResult r = run_cli("report --in " + in_dir + " --out " + out_dir);
  CHECK(r.exit_code == 0);
  std::string out = file_bytes(out_dir + "/records.csv");
  CHECK(out.find("baseline_ppo,100,1,100,40,-900.5") != std::string::npos);
  CHECK(out.find("selfmodel_ppo,50,1,50,40,-850") != std::string::npos);
}

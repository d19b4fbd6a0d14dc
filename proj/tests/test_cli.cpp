// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "drfuse/data.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = DRFUSE_CLI_PATH;

fs::path work_dir() {
  fs::path dir = fs::temp_directory_path() / "drfuse_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const std::string& capture = "") {
  std::string cmd = std::string(kCli) + " " + args;
  if (!capture.empty()) cmd += " >" + capture + " 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// tiny but complete experiment config against a generated smoke dataset
std::string smoke_experiment(const fs::path& manifest, std::uint64_t seed = 5) {
  nlohmann::json j;
  j["dataset"]["manifest"] = manifest.string();
  j["model"] = {{"type", "drfuse"},       {"n_classes", 4},  {"n_features", 6},
                {"d_model", 8},           {"n_heads", 2},    {"ff_dim", 16},
                {"image_size", 8},        {"conv_channels", {4, 4, 8}}};
  j["training"] = {{"lr", 0.003}, {"batch_size", 16}, {"max_epochs", 3}, {"seed", seed}};
  j["eval"] = {{"bootstrap_iters", 50}};
  return j.dump(2);
}

}  // namespace

TEST_CASE("generate: deterministic record files and preset metadata") {
  fs::path dir = work_dir() / "gen";
  fs::remove_all(dir);
  CHECK(run_cli("generate --preset smoke --out " + (dir / "a").string()) == 0);
  CHECK(run_cli("generate --preset smoke --out " + (dir / "b").string()) == 0);
  CHECK(slurp(dir / "a" / "records.jsonl") == slurp(dir / "b" / "records.jsonl"));

  CHECK(run_cli("generate --preset mimic-like --out " + (dir / "m").string()) == 0);
  auto manifest = nlohmann::json::parse(slurp(dir / "m" / "manifest.json"));
  CHECK(manifest["n_classes"] == 25);
  CHECK(manifest["n_features"] == 17);
  CHECK(manifest["seq_len"] == 48);
}

TEST_CASE("generate: invalid config exits nonzero and writes nothing") {
  fs::path dir = work_dir() / "gen_bad";
  fs::remove_all(dir);
  write_file(work_dir() / "bad_gen.json",
             R"({"dataset": {"synthetic": {"n_samples": 50, "missing_rate": 1.5}}})");
  int rc = run_cli("generate --config " + (work_dir() / "bad_gen.json").string() + " --out " +
                       (dir / "out").string(),
                   (work_dir() / "bad_gen.log").string());
  CHECK(rc != 0);
  CHECK_FALSE(fs::exists(dir / "out" / "records.jsonl"));
  CHECK(slurp(work_dir() / "bad_gen.log").find("missing_rate") != std::string::npos);
}

TEST_CASE("train: smoke run within budget, missing dataset path named in the error") {
  fs::path dir = work_dir() / "train";
  fs::remove_all(dir);
  fs::create_directories(dir);
  REQUIRE(run_cli("generate --preset smoke --out " + (dir / "data").string()) == 0);

  write_file(dir / "exp.json", smoke_experiment(dir / "data" / "manifest.json"));
  auto t0 = std::chrono::steady_clock::now();
  CHECK(run_cli("train --config " + (dir / "exp.json").string() + " --out " +
                (dir / "run").string()) == 0);
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 60.0);
  CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
  CHECK(fs::exists(dir / "run" / "train_log.jsonl"));
  CHECK(fs::exists(dir / "run" / "config.resolved.json"));

  write_file(dir / "missing.json", smoke_experiment(dir / "nowhere" / "manifest.json"));
  int rc = run_cli("train --config " + (dir / "missing.json").string() + " --out " +
                       (dir / "run2").string(),
                   (dir / "missing.log").string());
  CHECK(rc != 0);
  CHECK(slurp(dir / "missing.log").find("nowhere") != std::string::npos);
}

TEST_CASE("train: resolved config snapshot retrains to an identical checkpoint") {
  fs::path dir = work_dir() / "resnap";
  fs::remove_all(dir);
  fs::create_directories(dir);
  REQUIRE(run_cli("generate --preset smoke --out " + (dir / "data").string()) == 0);
  write_file(dir / "exp.json", smoke_experiment(dir / "data" / "manifest.json"));
  REQUIRE(run_cli("train --config " + (dir / "exp.json").string() + " --out " +
                  (dir / "run1").string()) == 0);
  REQUIRE(run_cli("train --config " + (dir / "run1" / "config.resolved.json").string() +
                  " --out " + (dir / "run2").string()) == 0);
  CHECK(slurp(dir / "run1" / "checkpoint.bin") == slurp(dir / "run2" / "checkpoint.bin"));
}

TEST_CASE("evaluate: matched-only vs full, alpha masking, byte-identical reruns") {
  fs::path dir = work_dir() / "eval";
  fs::remove_all(dir);
  fs::create_directories(dir);
  REQUIRE(run_cli("generate --preset smoke --out " + (dir / "data").string()) == 0);
  write_file(dir / "exp.json", smoke_experiment(dir / "data" / "manifest.json"));
  REQUIRE(run_cli("train --config " + (dir / "exp.json").string() + " --out " +
                  (dir / "run").string()) == 0);
  std::string ck = (dir / "run" / "checkpoint.bin").string();

  CHECK(run_cli("evaluate --config " + (dir / "exp.json").string() + " --checkpoint " + ck +
                " --out " + (dir / "full").string()) == 0);
  CHECK(run_cli("evaluate --config " + (dir / "exp.json").string() + " --checkpoint " + ck +
                " --matched-only --out " + (dir / "matched").string()) == 0);

  auto full = nlohmann::json::parse(slurp(dir / "full" / "summary.json"));
  auto matched = nlohmann::json::parse(slurp(dir / "matched" / "summary.json"));
  CHECK(full["matched_only"] == false);
  CHECK(matched["matched_only"] == true);
  CHECK(full["n_samples"].get<std::size_t>() > matched["n_samples"].get<std::size_t>());

  // alpha rows for CXR-absent samples end in exactly 0
  std::ifstream alpha(dir / "full" / "alpha.csv");
  std::string line;
  std::getline(alpha, line);  // header
  std::size_t absent_rows = 0;
  while (std::getline(alpha, line)) {
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      auto next = line.find(',', pos);
      cells.push_back(line.substr(pos, next - pos));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    REQUIRE(cells.size() == 6);
    if (cells[2] == "0") {
      CHECK(cells[5] == "0");
      ++absent_rows;
    }
  }
  CHECK(absent_rows > 0);

  CHECK(run_cli("evaluate --config " + (dir / "exp.json").string() + " --checkpoint " + ck +
                " --out " + (dir / "full2").string()) == 0);
  CHECK(slurp(dir / "full" / "summary.json") == slurp(dir / "full2" / "summary.json"));
  CHECK(slurp(dir / "full" / "per_class.csv") == slurp(dir / "full2" / "per_class.csv"));
  CHECK(slurp(dir / "full" / "alpha.csv") == slurp(dir / "full2" / "alpha.csv"));
}

TEST_CASE("ablate: canonical rows, shared split seed, idempotent resume") {
  fs::path dir = work_dir() / "ablate";
  fs::remove_all(dir);
  fs::create_directories(dir);
  REQUIRE(run_cli("generate --preset smoke --out " + (dir / "data").string()) == 0);
  write_file(dir / "exp.json", smoke_experiment(dir / "data" / "manifest.json"));

  CHECK(run_cli("ablate --config " + (dir / "exp.json").string() + " --out " +
                (dir / "out").string()) == 0);
  auto summary = nlohmann::json::parse(slurp(dir / "out" / "ablation_summary.json"));
  REQUIRE(summary["rows"].size() == 4);
  CHECK(summary["rows"][0]["variant"] == "full");
  CHECK(summary["rows"][1]["variant"] == "w/o disentangled");
  CHECK(summary["rows"][2]["variant"] == "MSE alignment");
  CHECK(summary["rows"][3]["variant"] == "w/o attn. ranking");
  CHECK(summary.contains("split_seed"));

  // resume path: rerunning must reuse the per-variant checkpoints and give
  // byte-identical reports
  auto t0 = std::chrono::steady_clock::now();
  CHECK(run_cli("ablate --config " + (dir / "exp.json").string() + " --out " +
                (dir / "out").string()) == 0);
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 30.0);
  auto summary2 = nlohmann::json::parse(slurp(dir / "out" / "ablation_summary.json"));
  CHECK(summary == summary2);
}

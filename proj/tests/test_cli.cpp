#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support/synth_data.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;  // path to the capsnet binary, from argv
fs::path g_root;    // scratch directory shared by the cases
fs::path g_data;    // synthetic MNIST corpus

int run(const std::string& args, const std::string& log_name = "log.txt") {
  const std::string log = (g_root / log_name).string();
  const int status = std::system((g_cli + " " + args + " >" + log + " 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_config(const fs::path& p, const std::string& extra = "") {
  std::ofstream out(p);
  out << "dataset=mnist\n"
         "conv.count=1\nconv1.filters=8\nconv1.kernel=9\nconv1.stride=2\n"
         "primary.types=2\nprimary.dim=8\nprimary.kernel=5\nprimary.stride=2\n"
         "output.dim=8\ndecoder.hidden=32\n"
         "train.batch=10\ntrain.epochs=1\ntrain.limit=30\nval.limit=20\n"
         "seed=5\n"
      << extra;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("train writes checkpoints and a metrics csv") {
  write_config(g_root / "tiny.cfg");
  const auto out = g_root / "run1";
  REQUIRE(run("train --config " + (g_root / "tiny.cfg").string() + " --data " + g_data.string() +
              " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "ckpt_epoch_001.caps"));
  CHECK(fs::exists(out / "final.caps"));
  auto csv = slurp(out / "metrics.csv");
  CHECK(csv.rfind("epoch,margin_loss,recon_loss,total_loss,val_accuracy\n", 0) == 0);
  CHECK(count_lines(csv) == 2);  // header + one epoch
  // the epoch row carries five comma-separated fields
  std::istringstream row(csv.substr(csv.find('\n') + 1));
  std::string field;
  int fields = 0;
  while (std::getline(row, field, ',')) ++fields;
  CHECK(fields == 5);
}

TEST_CASE("training runs are bit-deterministic") {
  write_config(g_root / "det.cfg");
  const auto a = g_root / "det_a";
  const auto b = g_root / "det_b";
  REQUIRE(run("train --config " + (g_root / "det.cfg").string() + " --data " + g_data.string() +
              " --out " + a.string()) == 0);
  REQUIRE(run("train --config " + (g_root / "det.cfg").string() + " --data " + g_data.string() +
              " --out " + b.string()) == 0);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "final.caps") == slurp(b / "final.caps"));
  // a different seed changes the metrics
  const auto c = g_root / "det_c";
  REQUIRE(run("train --config " + (g_root / "det.cfg").string() + " --data " + g_data.string() +
              " --seed 77 --out " + c.string()) == 0);
  CHECK(slurp(a / "metrics.csv") != slurp(c / "metrics.csv"));
}

TEST_CASE("resumed training reproduces the uninterrupted run") {
  write_config(g_root / "res.cfg", "");
  const auto full = g_root / "res_full";
  const auto part = g_root / "res_part";
  REQUIRE(run("train --config " + (g_root / "res.cfg").string() + " --data " + g_data.string() +
              " --epochs 2 --out " + full.string()) == 0);
  REQUIRE(run("train --config " + (g_root / "res.cfg").string() + " --data " + g_data.string() +
              " --epochs 1 --out " + part.string()) == 0);
  REQUIRE(run("train --config " + (g_root / "res.cfg").string() + " --data " + g_data.string() +
              " --epochs 2 --out " + part.string() + " --resume " +
              (part / "ckpt_epoch_001.caps").string()) == 0);
  CHECK(slurp(full / "final.caps") == slurp(part / "final.caps"));
  CHECK(slurp(full / "metrics.csv") == slurp(part / "metrics.csv"));
}

TEST_CASE("eval prints an accuracy line") {
  // reuses the checkpoint from the first case
  REQUIRE(run("eval --checkpoint " + (g_root / "run1" / "final.caps").string() + " --data " +
              g_data.string() + " --limit 10",
              "eval.txt") == 0);
  auto text = slurp(g_root / "eval.txt");
  CHECK(text.rfind("accuracy ", 0) == 0);
  const double acc = std::stod(text.substr(9));
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("ensemble evaluates a manifest with comments and relative paths") {
  {
    std::ofstream m(g_root / "ens.txt");
    m << "# two members (same file twice is fine)\n";
    m << "run1/final.caps\n";
    m << (g_root / "run1" / "final.caps").string() << "\n";
  }
  REQUIRE(run("ensemble --manifest " + (g_root / "ens.txt").string() + " --data " +
              g_data.string() + " --limit 10",
              "ens.txt.out") == 0);
  CHECK(slurp(g_root / "ens.txt.out").rfind("ensemble accuracy ", 0) == 0);
}

TEST_CASE("reconstruct writes a two-row PPM grid") {
  const auto ppm = g_root / "grid.ppm";
  REQUIRE(run("reconstruct --checkpoint " + (g_root / "run1" / "final.caps").string() +
              " --data " + g_data.string() + " --count 4 --out " + ppm.string()) == 0);
  auto bytes = slurp(ppm);
  // originals on top, reconstructions below: 4*28 x 2*28, 8-bit RGB
  const std::string header = "P6\n112 56\n255\n";
  REQUIRE(bytes.rfind(header, 0) == 0);
  CHECK(bytes.size() == header.size() + std::size_t(112) * 56 * 3);
}

TEST_CASE("config problems exit with status 2") {
  write_config(g_root / "bad.cfg", "no_such_key=1\n");
  CHECK(run("train --config " + (g_root / "bad.cfg").string() + " --data " + g_data.string() +
            " --out " + (g_root / "bad_out").string(),
            "bad.txt") == 2);
  CHECK(slurp(g_root / "bad.txt").find("unknown config key") != std::string::npos);

  write_config(g_root / "bad2.cfg", "conv1.kernel=29\n");
  CHECK(run("train --config " + (g_root / "bad2.cfg").string() + " --data " + g_data.string() +
            " --out " + (g_root / "bad_out").string()) == 2);

  // a missing config file is also a config error
  CHECK(run("train --config " + (g_root / "nope.cfg").string() + " --data " + g_data.string() +
            " --out " + (g_root / "bad_out").string()) == 2);
}

TEST_CASE("data problems exit with status 3") {
  write_config(g_root / "ok.cfg");
  CHECK(run("train --config " + (g_root / "ok.cfg").string() + " --data " +
            (g_root / "no_data").string() + " --out " + (g_root / "d_out").string()) == 3);
  CHECK(run("eval --checkpoint " + (g_root / "missing.caps").string() + " --data " +
            g_data.string()) == 3);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <capsnet-binary> [doctest args]\n");
    return 1;
  }
  g_cli = argv[1];
  g_root = fs::temp_directory_path() / "capsnet_cli_test";
  fs::remove_all(g_root);
  fs::create_directories(g_root);
  g_data = g_root / "mnist";
  fs::create_directories(g_data);
  capsnet::testing::write_synthetic_mnist(g_data.string(), 60, 20, 123);

  doctest::Context ctx;
  ctx.applyCommandLine(argc - 1, argv + 1);
  const int rc = ctx.run();
  fs::remove_all(g_root);
  return rc;
}

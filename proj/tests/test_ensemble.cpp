#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "capsnet/ensemble.hpp"
#include "support/synth_data.hpp"

using namespace capsnet;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.input_channels = 1;
  cfg.input_size = 28;
  cfg.num_classes = 10;
  cfg.conv_layers = {{16, 9, 2}};
  cfg.primary = {4, 8, 5, 2};
  cfg.output = {10, 8, 3};
  cfg.decoder_hidden = {32};
  cfg.seed = seed;
  return cfg;
}

DatasetSplit digit_split(int n, std::uint64_t seed) {
  DatasetSplit s;
  s.name = "val";
  s.n = n;
  s.channels = 1;
  s.height = 28;
  s.width = 28;
  for (int i = 0; i < n; ++i) {
    auto px = capsnet::testing::render_digit(i % 10, seed + std::uint64_t(i) * 77);
    for (auto b : px) s.pixels.push_back(float(b) / 255.0f);
    s.labels.push_back(i % 10);
  }
  return s;
}

Model<float> trained_member(std::uint64_t seed, int epochs) {
  auto model = build_model<float>(tiny_config(seed));
  auto split = digit_split(40, 1000 + seed);
  split.shuffle_seed = seed;
  AdamState<float> adam;
  adam.init(model);
  for (int e = 0; e < epochs; ++e) train_epoch(model, split, adam, e, {.batch_size = 8});
  return model;
}

}  // namespace

TEST_CASE("ensemble of identical members reproduces the single model exactly") {
  auto member = trained_member(5, 3);
  Ensemble e;
  e.members = {member, member, member};
  Ensemble single;
  single.members = {member};

  auto split = digit_split(20, 50);
  for (int i = 0; i < split.n; ++i) {
    auto img = split.image(i);
    CHECK(ensemble_predict(e, img) == ensemble_predict(single, img));
    auto se = ensemble_scores(e, img);
    auto ss = ensemble_scores(single, img);
    for (std::size_t c = 0; c < se.size(); ++c) CHECK(se[c] == doctest::Approx(ss[c]).epsilon(1e-12));
  }
  CHECK(ensemble_evaluate(e, split) == ensemble_evaluate(single, split));
}

TEST_CASE("single-member ensemble equals plain prediction") {
  auto member = trained_member(6, 2);
  Ensemble e;
  e.members = {member};
  auto split = digit_split(10, 60);
  for (int i = 0; i < split.n; ++i) {
    auto img = split.image(i);
    auto out = forward(member, img);
    CHECK(ensemble_predict(e, img) == predict_class(member.cfg, out.class_capsules));
  }
}

TEST_CASE("ensemble scores are the arithmetic mean of member scores") {
  auto a = trained_member(7, 2);
  auto b = trained_member(8, 2);
  auto c = trained_member(9, 2);
  Ensemble ea{{a}}, eb{{b}}, ec{{c}}, all{{a, b, c}};
  auto img = digit_split(1, 70).image(0);
  auto sa = ensemble_scores(ea, img), sb = ensemble_scores(eb, img),
       sc = ensemble_scores(ec, img), s = ensemble_scores(all, img);
  for (std::size_t k = 0; k < s.size(); ++k)
    CHECK(s[k] == doctest::Approx((sa[k] + sb[k] + sc[k]) / 3.0).epsilon(1e-9));
}

TEST_CASE("member order does not change predictions") {
  auto a = trained_member(10, 2);
  auto b = trained_member(11, 2);
  auto c = trained_member(12, 2);
  Ensemble abc{{a, b, c}}, cba{{c, b, a}};
  auto split = digit_split(15, 80);
  for (int i = 0; i < split.n; ++i) {
    auto img = split.image(i);
    CHECK(ensemble_predict(abc, img) == ensemble_predict(cba, img));
  }
}

TEST_CASE("validate rejects mismatched members") {
  Ensemble empty;
  CHECK_THROWS_AS(empty.validate(), ConfigError);

  auto a = build_model<float>(tiny_config(1));
  auto cfg = tiny_config(2);
  cfg.num_classes = 4;
  cfg.output.num_out_capsules = 4;
  auto b = build_model<float>(cfg);
  Ensemble e{{a, b}};
  CHECK_THROWS_WITH_AS(e.validate(), doctest::Contains("class count"), ConfigError);

  auto cfg3 = tiny_config(3);
  cfg3.nota = true;
  cfg3.output.num_out_capsules = 11;
  Ensemble e2{{a, build_model<float>(cfg3)}};
  CHECK_THROWS_WITH_AS(e2.validate(), doctest::Contains("NOTA"), ConfigError);
}

TEST_CASE("ensembling distinct seeds does not hurt on a split they all fit") {
  // three members trained on the same data from different initializations
  auto split = digit_split(40, 1005);
  split.shuffle_seed = 5;
  std::vector<Model<float>> members;
  double mean_member = 0;
  for (std::uint64_t s : {21, 22, 23}) {
    auto model = build_model<float>(tiny_config(s));
    AdamState<float> adam;
    adam.init(model);
    for (int e = 0; e < 12; ++e) train_epoch(model, split, adam, e, {.batch_size = 8});
    mean_member += evaluate(model, split);
    members.push_back(std::move(model));
  }
  mean_member /= 3.0;
  Ensemble e{std::move(members)};
  CHECK(ensemble_evaluate(e, split) >= mean_member - 1e-9);
}

TEST_CASE("manifest parsing: comments, blanks, relative paths") {
  auto dir = fs::temp_directory_path() / "capsnet_manifest_test";
  fs::remove_all(dir);
  fs::create_directories(dir / "sub");
  {
    std::ofstream out(dir / "ens.txt");
    out << "# members\n";
    out << "\n";
    out << "a.caps\n";
    out << "sub/b.caps\n";
    out << "/abs/c.caps\n";
  }
  auto paths = read_ensemble_manifest((dir / "ens.txt").string());
  REQUIRE(paths.size() == 3);
  CHECK(paths[0] == (dir / "a.caps").string());
  CHECK(paths[1] == (dir / "sub/b.caps").string());
  CHECK(paths[2] == "/abs/c.caps");
  CHECK_THROWS_AS(read_ensemble_manifest((dir / "missing.txt").string()), FormatError);
  fs::remove_all(dir);
}

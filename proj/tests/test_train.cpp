#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "vdet/split.hpp"
#include "vdet/synthetic.hpp"
#include "vdet/train.hpp"

using namespace vdet;

namespace {

struct Fixture {
  DatasetManifest manifest;
  SplitAssignment assignment;
  BpeModel bpe;
  ModelConfig mcfg;
  TrainConfig tcfg;

  Fixture() {
    SyntheticConfig sc;
    sc.n_samples = 60;
    sc.n_projects = 6;
    sc.seed = 3;
    manifest = dedup(generate_synthetic(sc));
    for (const auto& s : manifest.samples) {
      const auto p = s.project;
      if (!assignment.projects.count(p))
        assignment.projects[p] = assignment.projects.size() < 4   ? Split::train
                                 : assignment.projects.size() == 4 ? Split::val
                                                                   : Split::test;
    }
    std::vector<std::string> texts;
    for (const auto& s : manifest.samples) texts.push_back(normalize(s.code, s.language).text);
    bpe = bpe_train(texts, 200);
    mcfg.d_model = 16;
    mcfg.n_heads = 2;
    mcfg.n_layers = 1;
    mcfg.d_ffn = 32;
    mcfg.max_len = 64;
    tcfg.epochs = 2;
    tcfg.seed = 11;
  }
};

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("class weights") {
  const auto w = compute_class_weights({32000, 13000}, ClassWeightMode::inverse_freq);
  CHECK(w[0] == doctest::Approx(0.7031).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(1.7308).epsilon(1e-4));
  const auto even = compute_class_weights({7, 7}, ClassWeightMode::inverse_freq);
  CHECK(even[0] == 1.0);
  CHECK(even[1] == 1.0);
  const auto none = compute_class_weights({1, 99}, ClassWeightMode::none);
  CHECK(none == std::array<double, 2>{1.0, 1.0});
  CHECK_THROWS_AS(compute_class_weights({0, 5}, ClassWeightMode::inverse_freq), Error);
}

TEST_CASE("oversampling balances the classes") {
  const std::vector<int> labels = {0, 0, 0, 0, 0, 0, 1, 1};
  const auto idx = oversample_indices(labels, 4);
  CHECK(idx.size() == 12);
  CHECK(std::count(idx.begin(), idx.end(), 6u) == 3);
  CHECK(std::count(idx.begin(), idx.end(), 7u) == 3);
  CHECK(idx == oversample_indices(labels, 4));

  const std::vector<int> odd = {0, 0, 0, 0, 0, 1, 1};
  const auto o = oversample_indices(odd, 1);
  const auto pos = std::count_if(o.begin(), o.end(), [&](std::size_t i) { return odd[i] == 1; });
  CHECK(pos == 5);

  const std::vector<int> balanced = {1, 0, 1, 0};
  auto b = oversample_indices(balanced, 2);
  std::sort(b.begin(), b.end());
  CHECK(b == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(oversample_indices({0, 0}, 1), Error);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.lr = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.early_stop_patience = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(TrainConfig::from_json(TrainConfig{}.to_json()).to_json() == TrainConfig{}.to_json());
}

TEST_CASE("training is deterministic and honours patience 0") {
  Fixture f;
  f.tcfg.early_stop_patience = 0;
  f.tcfg.epochs = 3;
  const auto a = train(f.manifest, f.assignment, f.bpe, f.mcfg, f.tcfg);
  const auto b = train(f.manifest, f.assignment, f.bpe, f.mcfg, f.tcfg);
  CHECK(a.epochs.size() == 3);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  for (const auto& e : a.epochs) CHECK(std::isfinite(e.avg_train_loss));
  double best = -1;
  for (const auto& e : a.epochs) best = std::max(best, e.val_f1);
  CHECK(a.checkpoint.meta.best_val_f1 == best);
  CHECK(a.checkpoint.tokenizer_hash == f.bpe.content_hash());
}

TEST_CASE("training needs train and val samples") {
  Fixture f;
  for (auto& [p, s] : f.assignment.projects) s = Split::train;
  CHECK_THROWS_WITH_AS(train(f.manifest, f.assignment, f.bpe, f.mcfg, f.tcfg),
                       doctest::Contains("validation"), Error);
}

TEST_CASE("checkpoint save, load and re-save are byte-identical") {
  Fixture f;
  f.tcfg.epochs = 1;
  const auto r = train(f.manifest, f.assignment, f.bpe, f.mcfg, f.tcfg);
  const auto path = temp_path("vdet_test.ckpt");
  save_checkpoint(path, r.checkpoint);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.params.config == r.checkpoint.params.config);
  CHECK(loaded.params.token_embedding == r.checkpoint.params.token_embedding);
  CHECK(loaded.params.classifier_w == r.checkpoint.params.classifier_w);
  CHECK(serialize_checkpoint(loaded) == read_file(path));
  std::filesystem::remove(path);

  const auto bytes = serialize_checkpoint(r.checkpoint);
  CHECK(bytes.substr(0, 4) == "VDET");
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 4);
  const auto header = nlohmann::json::parse(bytes.substr(12, header_len));
  const std::string last = header.at("tensors").back().at("name");
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 8)),
                       doctest::Contains(("tensor '" + last + "' is missing").c_str()), Error);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(bad), doctest::Contains("magic"), Error);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(bad), doctest::Contains("version"), Error);
}

TEST_CASE("loss logs are written") {
  TrainResult r;
  r.epochs = {{1, 0.7, 0.5}, {2, 0.4, 0.8}};
  r.final_epoch_step_losses = {0.5, 0.3};
  const auto dir = std::filesystem::temp_directory_path() / "vdet_loss_logs";
  std::filesystem::create_directories(dir);
  write_loss_logs(dir.string(), r);
  CHECK(read_file((dir / "loss_per_epoch.csv").string()) ==
        "epoch,avg_train_loss,val_f1\n1,0.70000000,0.50000000\n2,0.40000000,0.80000000\n");
  CHECK(read_file((dir / "loss_final_epoch.csv").string()) ==
        "step,loss\n1,0.50000000\n2,0.30000000\n");
  std::filesystem::remove_all(dir);
}

/* Copyright 2026 The AMTNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Network architecture, losses, optimizer, and checkpoint tests.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "amt/losses.hpp"
#include "amt/network.hpp"
#include "amt/optimizer.hpp"
#include "amt/rng.hpp"
#include "test_util.hpp"

using namespace amt;

// ---------------------------------------------------------------------------
// Architecture shapes
// ---------------------------------------------------------------------------

TEST_CASE("the full-width network walks the documented shape ladder") {
  AMTNet<float> net(12, 3, 1.0);
  net.set_train(false);
  Tensor<float> x({1, 1, 1200, 399});
  std::vector<ShapeTraceEntry> trace;
  const auto r = net.forward(x, true, &trace);

  std::vector<std::pair<std::string, std::vector<std::size_t>>> got;
  for (const auto& e : trace) got.emplace_back(e.name, e.shape);

  const std::vector<std::pair<std::string, std::vector<std::size_t>>> expected = {
      {"shared", {64, 300, 100}},
      {"stage1", {64, 300, 100}},
      {"stage1", {64, 300, 100}},
      {"stage2", {128, 150, 50}},
      {"stage2", {128, 150, 50}},
      {"stage3", {256, 75, 25}},
      {"stage3", {256, 75, 25}},
      {"stage4", {512, 38, 13}},
      {"stage4", {512, 38, 13}},
      {"embedding", {512}},
      {"fc", {12}},
      {"dis", {3}},
  };
  CHECK(got == expected);
  CHECK(r.main_logits.dim(0) == 1);
  CHECK(r.main_logits.dim(1) == 12);
  CHECK(r.aux_logits.dim(1) == 3);
  CHECK(r.main_embedding.dim(1) == 512);
  CHECK(net.embedding_dim() == 512);
}

TEST_CASE("a 15-s input halves only the time axis") {
  AMTNet<float> net(12, 3, 0.25);
  net.set_train(false);
  Tensor<float> x({1, 1, 600, 399});
  std::vector<ShapeTraceEntry> trace;
  net.forward(x, false, &trace);
  REQUIRE(!trace.empty());
  CHECK(trace[0].name == "shared");
  CHECK(trace[0].shape == std::vector<std::size_t>{16, 150, 100});
}

TEST_CASE("width multipliers scale every stage") {
  AMTNet<float> net(12, 3, 0.5);
  net.set_train(false);
  Tensor<float> x({1, 1, 120, 64});
  std::vector<ShapeTraceEntry> trace;
  net.forward(x, false, &trace);
  CHECK(trace[0].shape[0] == 32);
  CHECK(trace.back().shape == std::vector<std::size_t>{12});  // fc
  for (const auto& e : trace)
    if (e.name == "stage4") CHECK(e.shape[0] == 256);
  CHECK(net.embedding_dim() == 256);
}

TEST_CASE("zero input stays zero through the shared front end in eval mode") {
  AMTNet<float> net(12, 3, 0.125);
  net.set_train(false);
  Tensor<float> x({2, 1, 64, 32});
  const Tensor<float> rep = net.shared_forward(x);
  for (std::size_t i = 0; i < rep.numel(); ++i) REQUIRE(rep.data()[i] == 0.0f);
}

TEST_CASE("network construction validates head sizes") {
  CHECK_THROWS_AS(AMTNet<float>(1, 3), ConfigError);
  CHECK_THROWS_AS(AMTNet<float>(12, 4), ConfigError);
  CHECK_THROWS_AS(AMTNet<float>(12, 1), ConfigError);
  CHECK_NOTHROW(AMTNet<float>(2, 2, 0.125));
}

TEST_CASE("parameter initialization is deterministic and branch-distinct") {
  AMTNet<float> a(12, 3, 0.125);
  AMTNet<float> b(12, 3, 0.125);
  CHECK(parameter_checksum(a) == parameter_checksum(b));

  // The two branches start from different draws of the same scheme.
  auto find = [&](AMTNet<float>& net, const std::string& name) -> Tensor<float>* {
    for (auto& e : net.registry())
      if (e.name == name) return e.value;
    return nullptr;
  };
  Tensor<float>* main_w = find(a, "main.block0.conv1.weight");
  Tensor<float>* aux_w = find(a, "aux.block0.conv1.weight");
  REQUIRE(main_w != nullptr);
  REQUIRE(aux_w != nullptr);
  REQUIRE(main_w->numel() == aux_w->numel());
  CHECK(std::memcmp(main_w->data(), aux_w->data(), main_w->numel() * sizeof(float)) != 0);
}

TEST_CASE("a residual block with zeroed convolutions is a plain ReLU") {
  BasicBlock<float> block(8, 8, 1);
  block.set_train(false);
  Registry<float> reg;
  block.collect("b", Partition::kShared, reg);
  for (auto& e : reg)
    if (e.name.find("conv") != std::string::npos) e.value->zero();

  Tensor<float> x({1, 8, 6, 6});
  RandomStream rs(31);
  for (std::size_t i = 0; i < x.numel(); ++i)
    x.data()[i] = static_cast<float>(rs.normal());
  const Tensor<float> y = block.forward(x);
  REQUIRE(y.same_shape(x));
  for (std::size_t i = 0; i < x.numel(); ++i)
    REQUIRE(y.data()[i] == std::max(0.0f, x.data()[i]));
}

TEST_CASE("registry partitions cover shared, recognition, and auxiliary") {
  AMTNet<float> net(12, 3, 0.125);
  std::map<Partition, int> counts;
  std::set<std::string> names;
  for (const auto& e : net.registry()) {
    counts[e.partition]++;
    REQUIRE(names.insert(e.name).second);  // unique names
  }
  CHECK(counts[Partition::kShared] > 0);
  CHECK(counts[Partition::kRecognition] > 0);
  CHECK(counts[Partition::kAuxiliary] > 0);

  CHECK(names.count("shared.conv.weight") == 1);
  CHECK(names.count("fc.weight") == 1);
  CHECK(names.count("fc.bias") == 1);
  CHECK(names.count("dis.weight") == 1);
  CHECK(names.count("main.block7.bn2.gamma") == 1);
  CHECK(names.count("aux.block2.proj_conv.weight") == 1);
}

// ---------------------------------------------------------------------------
// Softmax and head probabilities
// ---------------------------------------------------------------------------

TEST_CASE("softmax rows are probability vectors across many random draws") {
  RandomStream rs(101);
  for (int trial = 0; trial < 120; ++trial) {
    Tensor<double> logits({3, 12});
    for (std::size_t i = 0; i < logits.numel(); ++i)
      logits.data()[i] = 8.0 * rs.normal();
    const Tensor<double> p = softmax_rows(logits);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < 12; ++k) {
        REQUIRE(p.at2(r, k) > 0.0);
        REQUIRE(p.at2(r, k) < 1.0);
        sum += p.at2(r, k);
      }
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-6));
    }
  }
}

TEST_CASE("equal logits produce the uniform distribution") {
  Tensor<double> logits({1, 12});
  for (std::size_t i = 0; i < 12; ++i) logits.data()[i] = 3.7;
  const Tensor<double> p = softmax_rows(logits);
  for (std::size_t k = 0; k < 12; ++k)
    REQUIRE(p.at2(0, k) == Catch::Approx(1.0 / 12.0).margin(1e-12));
}

TEST_CASE("softmax is invariant to a constant shift") {
  Tensor<double> logits({1, 5});
  for (std::size_t i = 0; i < 5; ++i) logits.data()[i] = static_cast<double>(i) * 0.3;
  Tensor<double> shifted = logits;
  for (std::size_t i = 0; i < 5; ++i) shifted.data()[i] += 123.0;
  const Tensor<double> a = softmax_rows(logits);
  const Tensor<double> b = softmax_rows(shifted);
  for (std::size_t i = 0; i < 5; ++i)
    REQUIRE(a.data()[i] == Catch::Approx(b.data()[i]).margin(1e-12));
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

TEST_CASE("cross entropy of a one-hot on the true class is near zero") {
  Tensor<double> logits({2, 12});
  std::vector<int> y = {4, 9};
  for (std::size_t r = 0; r < 2; ++r) logits.at2(r, static_cast<std::size_t>(y[r])) = 60.0;
  const auto r = softmax_cross_entropy(logits, y);
  CHECK(r.loss < 1e-12);
  CHECK(r.counted == 2);
}

TEST_CASE("cross entropy of a confident wrong answer is large") {
  Tensor<double> logits({1, 12});
  logits.at2(0, 3) = 40.0;
  const auto r = softmax_cross_entropy(logits, {7});
  CHECK(r.loss > 10.0);
}

TEST_CASE("uniform probabilities cost ln of the class count") {
  Tensor<double> logits({4, 12});  // all zeros: uniform rows
  const auto r = softmax_cross_entropy(logits, {0, 3, 7, 11});
  CHECK(r.loss == Catch::Approx(std::log(12.0)).margin(1e-12));
  CHECK(std::log(12.0) == Catch::Approx(2.4849).margin(1e-4));
}

TEST_CASE("excluded labels contribute nothing and zero their gradient rows") {
  Tensor<double> logits({3, 5});
  logits.at2(0, 1) = 2.0;
  logits.at2(2, 3) = -1.0;
  const auto r = softmax_cross_entropy(logits, {1, kExcludedLabel, 3});
  CHECK(r.counted == 2);
  for (std::size_t k = 0; k < 5; ++k) REQUIRE(r.dlogits.at2(1, k) == 0.0);
}

TEST_CASE("the multi-task loss sums recognition and auxiliary terms") {
  Tensor<double> main_logits({2, 12});
  Tensor<double> aux_logits({2, 3});
  const auto r = loss_mt(main_logits, {0, 5}, aux_logits, {1, 2});
  CHECK(r.recognition == Catch::Approx(std::log(12.0)).margin(1e-12));
  CHECK(r.auxiliary == Catch::Approx(std::log(3.0)).margin(1e-12));
  CHECK(r.total == Catch::Approx(std::log(12.0) + std::log(3.0)).margin(1e-12));
  CHECK(r.total == Catch::Approx(3.5835).margin(1e-4));
  CHECK_FALSE(r.aux_all_masked);
}

TEST_CASE("fully masked auxiliary labels drop the auxiliary term") {
  Tensor<double> main_logits({2, 12});
  Tensor<double> aux_logits({2, 3});
  const auto r =
      loss_mt(main_logits, {0, 5}, aux_logits, {kExcludedLabel, kExcludedLabel});
  CHECK(r.auxiliary == 0.0);
  CHECK(r.total == Catch::Approx(std::log(12.0)).margin(1e-12));
  CHECK(r.aux_all_masked);
  for (std::size_t i = 0; i < r.d_aux.numel(); ++i) REQUIRE(r.d_aux.data()[i] == 0.0);
}

TEST_CASE("excluded recognition labels are rejected") {
  Tensor<double> main_logits({1, 12});
  Tensor<double> aux_logits({1, 3});
  CHECK_THROWS_AS(loss_mt(main_logits, {kExcludedLabel}, aux_logits, {0}), InvalidInput);
}

TEST_CASE("the adversarial loss is plain cross entropy against misleading labels") {
  Tensor<double> aux_logits({3, 3});  // uniform rows
  const auto r = loss_adv(aux_logits, {0, 1, 2});
  CHECK(r.value == Catch::Approx(std::log(3.0)).margin(1e-12));
  CHECK(r.value == Catch::Approx(1.0986).margin(1e-4));
  REQUIRE(r.d_aux.numel() == 9);
}

TEST_CASE("mean cross entropy works in probability space") {
  Tensor<double> probs({1, 12});
  for (std::size_t k = 0; k < 12; ++k) probs.at2(0, k) = 1.0 / 12.0;
  CHECK(mean_cross_entropy(probs, {5}) == Catch::Approx(std::log(12.0)).margin(1e-9));
}

// ---------------------------------------------------------------------------
// Misleading label sampling
// ---------------------------------------------------------------------------

TEST_CASE("misleading labels are uniform over the auxiliary classes") {
  RandomStream rng(404);
  const auto draws = sample_misleading_labels(3, 30000, rng);
  std::array<int, 3> counts = {0, 0, 0};
  for (int v : draws) {
    REQUIRE(v >= 0);
    REQUIRE(v < 3);
    counts[static_cast<std::size_t>(v)]++;
  }
  // Three-sigma binomial band around 10000 per class.
  const double sigma = std::sqrt(30000.0 * (1.0 / 3.0) * (2.0 / 3.0));
  for (int c : counts) REQUIRE(std::abs(c - 10000) <= 3.0 * sigma);
}

TEST_CASE("misleading label streams are reproducible") {
  RandomStream a(7), b(7);
  CHECK(sample_misleading_labels(3, 100, a) == sample_misleading_labels(3, 100, b));
}

TEST_CASE("binary auxiliary tasks draw from two labels") {
  RandomStream rng(12);
  const auto draws = sample_misleading_labels(2, 500, rng);
  std::set<int> seen(draws.begin(), draws.end());
  CHECK(seen == std::set<int>{0, 1});
}

TEST_CASE("misleading labels need at least two classes") {
  RandomStream rng(1);
  CHECK_THROWS_AS(sample_misleading_labels(1, 10, rng), InvalidInput);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

namespace {

struct ToyParams {
  Tensor<double> w{{4}};
  Tensor<double> g{{4}};

  Registry<double> registry() {
    Registry<double> r;
    r.push_back({"w", &w, &g, true, Partition::kShared});
    return r;
  }
};

}  // namespace

TEST_CASE("a zero learning rate leaves parameters untouched") {
  ToyParams p;
  for (std::size_t i = 0; i < 4; ++i) {
    p.w[i] = 1.0 + static_cast<double>(i);
    p.g[i] = 0.5;
  }
  const Tensor<double> before = p.w;
  AdamW<double> opt(1e-2);
  auto reg = p.registry();
  opt.step(reg, 0.0);
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(p.w[i] == before[i]);
}

TEST_CASE("decay without gradients shrinks weights by the decoupled factor") {
  ToyParams p;
  for (std::size_t i = 0; i < 4; ++i) p.w[i] = 2.0;
  p.g.zero();
  const double lr = 0.1, wd = 0.01;
  AdamW<double> opt(wd);
  auto reg = p.registry();
  for (int s = 0; s < 3; ++s) opt.step(reg, lr);
  const double expected = 2.0 * std::pow(1.0 - lr * wd, 3);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(p.w[i] == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("displacement scales linearly with the learning rate") {
  ToyParams a, b;
  for (std::size_t i = 0; i < 4; ++i) {
    a.w[i] = b.w[i] = 0.3 * static_cast<double>(i + 1);
    a.g[i] = b.g[i] = 0.7 - 0.2 * static_cast<double>(i);
  }
  AdamW<double> opt_fast(0.0), opt_slow(0.0);
  auto ra = a.registry();
  auto rb = b.registry();
  opt_fast.step(ra, 5e-4);
  opt_slow.step(rb, 1e-4);
  for (std::size_t i = 0; i < 4; ++i) {
    const double da = 0.3 * static_cast<double>(i + 1) - a.w[i];
    const double db = 0.3 * static_cast<double>(i + 1) - b.w[i];
    REQUIRE(da / db == Catch::Approx(5.0).epsilon(1e-9));
  }
}

TEST_CASE("optimizer state is per tensor and survives filtering") {
  ToyParams p;
  for (std::size_t i = 0; i < 4; ++i) {
    p.w[i] = 1.0;
    p.g[i] = 1.0;
  }
  AdamW<double> opt(0.0);
  auto reg = p.registry();
  // A filtered-out step must not advance this tensor's state or value.
  opt.step(reg, 1e-2, [](const NamedTensor<double>& t) { return t.name != "w"; });
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(p.w[i] == 1.0);
  // First real step of Adam with bias correction moves by about lr.
  opt.step(reg, 1e-2);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(p.w[i] == Catch::Approx(1.0 - 1e-2).margin(1e-6));
}

TEST_CASE("non-trainable tensors are never updated") {
  Tensor<double> value({2});
  Tensor<double> grad({2});
  value[0] = value[1] = 5.0;
  grad[0] = grad[1] = 1.0;
  Registry<double> reg;
  reg.push_back({"stat", &value, &grad, false, Partition::kShared});
  AdamW<double> opt(1e-2);
  opt.step(reg, 0.1);
  CHECK(value[0] == 5.0);
  CHECK(value[1] == 5.0);
}

// ---------------------------------------------------------------------------
// Gradient correctness on a tiny network
// ---------------------------------------------------------------------------

TEST_CASE("analytic gradients match central differences") {
  AMTNet<double> net(3, 2, 0.0625);  // stem width 4
  net.set_train(true);
  const auto x = amt_test::random_batch<double>(2, 8, 8, 55);
  const std::vector<int> y = {0, 2};
  const std::vector<int> y_aux = {1, 0};

  auto loss_fn = [&]() {
    net.zero_grad();
    auto fwd = net.forward(x, true);
    auto l = loss_mt(fwd.main_logits, y, fwd.aux_logits, y_aux);
    net.backward(&l.d_main, &l.d_aux);
    return l.total;
  };
  const auto res = amt_test::gradient_check(
      net, loss_fn, [](const NamedTensor<double>& t) { return t.trainable; }, 2, 1e-3, 77);
  INFO("worst " << res.worst_name << " rel err " << res.worst_rel_err);
  CHECK(res.checked >= 50);
  CHECK(res.failed == 0);
}

TEST_CASE("adversarial-stage gradients are also exact") {
  AMTNet<double> net(3, 2, 0.0625);
  net.set_train(true);
  const auto x = amt_test::random_batch<double>(2, 8, 8, 56);
  const std::vector<int> misleading = {0, 1};

  auto loss_fn = [&]() {
    net.zero_grad();
    auto fwd = net.forward_adversarial(x);
    auto l = loss_adv(fwd.aux_logits, misleading);
    net.backward(nullptr, &l.d_aux);
    return l.value;
  };
  const auto res = amt_test::gradient_check(
      net, loss_fn,
      [](const NamedTensor<double>& t) {
        return t.trainable && t.partition != Partition::kRecognition;
      },
      3, 1e-3, 78);
  INFO("worst " << res.worst_name << " rel err " << res.worst_rel_err);
  CHECK(res.checked >= 50);
  CHECK(res.failed == 0);
}

// ---------------------------------------------------------------------------
// Pruning
// ---------------------------------------------------------------------------

TEST_CASE("pruning preserves recognition outputs bitwise") {
  AMTNet<float> net(12, 3, 0.25);
  net.set_train(false);
  const auto x = amt_test::random_batch<float>(2, 60, 32, 61);
  const auto before = net.forward(x, true);
  net.prune_aux();
  const auto after = net.forward(x, false);
  REQUIRE(before.main_logits.numel() == after.main_logits.numel());
  CHECK(std::memcmp(before.main_logits.data(), after.main_logits.data(),
                    after.main_logits.numel() * sizeof(float)) == 0);
}

TEST_CASE("the pruned network refuses auxiliary work") {
  AMTNet<float> net(12, 3, 0.125);
  net.set_train(false);
  net.prune_aux();
  const auto x = amt_test::random_batch<float>(1, 40, 24, 63);
  CHECK_THROWS_AS(net.forward(x, true), UnsupportedOperation);
  CHECK_THROWS_AS(net.forward_adversarial(x), UnsupportedOperation);
  CHECK(net.pruned());
}

TEST_CASE("pruning removes nearly half of the parameters") {
  AMTNet<float> net(12, 3, 1.0);
  const auto before = static_cast<double>(net.parameter_count());
  net.prune_aux();
  const auto after = static_cast<double>(net.parameter_count());
  CHECK(after / before <= 0.55);
  CHECK(after / before > 0.45);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

std::string temp_path(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "amt_ckpt_test";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("checkpoints restore the exact network function") {
  AMTNet<float> net(5, 3, 0.125);
  net.set_train(false);
  const auto path = temp_path("roundtrip.amtc");
  save_checkpoint(path, net, "{\"note\":\"test\"}");

  const Checkpoint ck = read_checkpoint(path);
  CHECK(ck.n_class == 5);
  CHECK(ck.n_aux == 3);
  CHECK(ck.width_mult == 0.125);
  CHECK_FALSE(ck.pruned);
  CHECK(ck.config_json == "{\"note\":\"test\"}");

  auto restored = network_from_checkpoint<float>(ck);
  const auto x = amt_test::random_batch<float>(2, 40, 24, 71);
  const auto a = net.forward(x, true);
  const auto b = restored->forward(x, true);
  CHECK(std::memcmp(a.main_logits.data(), b.main_logits.data(),
                    a.main_logits.numel() * sizeof(float)) == 0);
  CHECK(std::memcmp(a.aux_logits.data(), b.aux_logits.data(),
                    a.aux_logits.numel() * sizeof(float)) == 0);
}

TEST_CASE("pruned checkpoints stay pruned and carry no auxiliary tensors") {
  AMTNet<float> net(4, 2, 0.125);
  net.set_train(false);
  net.prune_aux();
  const auto path = temp_path("pruned.amtc");
  save_checkpoint(path, net, "{}");
  const Checkpoint ck = read_checkpoint(path);
  CHECK(ck.pruned);
  for (const auto& [name, tensor] : ck.tensors) {
    CHECK(name.rfind("aux.", 0) == std::string::npos);
    CHECK(name.rfind("dis.", 0) == std::string::npos);
  }
  auto restored = network_from_checkpoint<float>(ck);
  CHECK(restored->pruned());
  const auto x = amt_test::random_batch<float>(1, 40, 24, 73);
  const auto a = net.forward(x, false);
  const auto b = restored->forward(x, false);
  CHECK(std::memcmp(a.main_logits.data(), b.main_logits.data(),
                    a.main_logits.numel() * sizeof(float)) == 0);
}

TEST_CASE("checkpoint loading rejects missing tensors and wrong shapes") {
  AMTNet<float> net(3, 2, 0.125);
  const auto path = temp_path("tamper.amtc");
  save_checkpoint(path, net, "{}");
  Checkpoint ck = read_checkpoint(path);

  Checkpoint missing = ck;
  missing.tensors.erase("fc.bias");
  CHECK_THROWS_AS(network_from_checkpoint<float>(missing), IoError);

  Checkpoint reshaped = ck;
  reshaped.tensors["fc.bias"] = Tensor<float>({7});
  CHECK_THROWS_AS(network_from_checkpoint<float>(reshaped), ShapeError);
}

TEST_CASE("checkpoint files with a foreign magic are refused") {
  const auto path = temp_path("foreign.amtc");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  std::fputs("GGUFv3 definitely not ours", f);
  std::fclose(f);
  CHECK_THROWS_AS(read_checkpoint(path), IoError);
  CHECK_THROWS_AS(read_checkpoint(temp_path("no_such_file.amtc")), IoError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mml/adam.hpp"
#include "mml/json_io.hpp"
#include "mml/mlp.hpp"
#include "mml/numerics.hpp"
#include "mml/train.hpp"
#include "oracles.hpp"

using namespace mml;

namespace {

std::vector<Matrix> random_features(Rng& rng, int B, const std::vector<int>& dims) {
  std::vector<Matrix> feats;
  for (int d : dims) {
    Matrix f(B, d);
    for (double& v : f.storage()) v = rng.normal();
    feats.push_back(std::move(f));
  }
  return feats;
}

// two-modality, two-blob set that a perceptron separates with margin
SplitData separable_toy(Rng& rng, int n, int dim) {
  SplitData data;
  data.features.assign(2, Matrix(n, dim));
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    data.labels[i] = y;
    for (int m = 0; m < 2; ++m)
      for (int d = 0; d < dim; ++d)
        data.features[m](i, d) = rng.normal(0.0, 0.3) + (d == m ? (y ? 2.0 : -2.0) : 0.0);
  }
  return data;
}

// perceptron oracle: returns true if it finds a separating hyperplane on the
// concatenated modalities
bool perceptron_separable(const SplitData& data, int max_iters = 2000) {
  const std::size_t d = data.features[0].cols() + data.features[1].cols();
  std::vector<double> w(d + 1, 0.0);
  for (int it = 0; it < max_iters; ++it) {
    int errors = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double z = w[d];
      for (std::size_t j = 0; j < data.features[0].cols(); ++j)
        z += w[j] * data.features[0](i, j);
      for (std::size_t j = 0; j < data.features[1].cols(); ++j)
        z += w[data.features[0].cols() + j] * data.features[1](i, j);
      const int pred = z > 0.0 ? 1 : 0;
      if (pred != data.labels[i]) {
        ++errors;
        const double dir = data.labels[i] ? 1.0 : -1.0;
        for (std::size_t j = 0; j < data.features[0].cols(); ++j)
          w[j] += dir * data.features[0](i, j);
        for (std::size_t j = 0; j < data.features[1].cols(); ++j)
          w[data.features[0].cols() + j] += dir * data.features[1](i, j);
        w[d] += dir;
      }
    }
    if (errors == 0) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("mlp_forward") {
  SUBCASE("zero parameters give uniform rows") {
    MlpStack stack;
    Rng rng(0);
    stack.nets.push_back(Mlp::init({5, 4, 3}, rng));
    for (MlpLayer& layer : stack.nets[0].layers) {
      layer.W.fill(0.0);
      std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
    const auto out = mlp_forward(stack, random_features(rng, 3, {5}));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(out[0](i, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("single identity layer is a softmax of the input") {
    MlpStack stack;
    Rng rng(1);
    stack.nets.push_back(Mlp::init({3, 3}, rng));
    stack.nets[0].layers[0].W.fill(0.0);
    for (int d = 0; d < 3; ++d) stack.nets[0].layers[0].W(d, d) = 1.0;
    std::fill(stack.nets[0].layers[0].b.begin(), stack.nets[0].layers[0].b.end(), 0.0);
    const auto feats = random_features(rng, 4, {3});
    const auto out = mlp_forward(stack, feats);
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<double> row(feats[0].row(i), feats[0].row(i) + 3);
      const auto expect = softmax(row);
      for (int c = 0; c < 3; ++c) CHECK(out[0](i, c) == doctest::Approx(expect[c]).epsilon(1e-12));
    }
  }

  SUBCASE("random stack matches a layer-by-layer reference") {
    Rng rng(2);
    MlpStack stack;
    stack.nets.push_back(Mlp::init({4, 5, 3}, rng));
    const auto feats = random_features(rng, 2, {4});
    const auto out = mlp_forward(stack, feats);
    for (int i = 0; i < 2; ++i) {
      // reference: explicit loops
      std::vector<double> h(feats[0].row(i), feats[0].row(i) + 4);
      const Mlp& net = stack.nets[0];
      std::vector<double> h1(5, 0.0);
      for (int j = 0; j < 5; ++j) {
        h1[j] = net.layers[0].b[j];
        for (int d = 0; d < 4; ++d) h1[j] += h[d] * net.layers[0].W(d, j);
        h1[j] = std::max(0.0, h1[j]);
      }
      std::vector<double> z(3, 0.0);
      for (int c = 0; c < 3; ++c) {
        z[c] = net.layers[1].b[c];
        for (int j = 0; j < 5; ++j) z[c] += h1[j] * net.layers[1].W(j, c);
      }
      const auto expect = softmax(z);
      for (int c = 0; c < 3; ++c) CHECK(out[0](i, c) == doctest::Approx(expect[c]).epsilon(1e-12));
    }
  }

  SUBCASE("output rows sum to one") {
    Rng rng(3);
    MlpStack stack;
    stack.nets.push_back(Mlp::init({6, 8, 4}, rng));
    const auto out = mlp_forward(stack, random_features(rng, 10, {6}));
    for (std::size_t i = 0; i < 10; ++i) {
      double sum = 0.0;
      for (int c = 0; c < 4; ++c) sum += out[0](i, c);
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }

  SUBCASE("dimension mismatch throws") {
    Rng rng(4);
    MlpStack stack;
    stack.nets.push_back(Mlp::init({4, 3}, rng));
    CHECK_THROWS_AS(mlp_forward(stack, random_features(rng, 2, {5})), std::invalid_argument);
  }
}

TEST_CASE("mlp_backward") {
  Rng rng(5);
  MlpStack stack;
  stack.nets.push_back(Mlp::init({4, 3, 2}, rng));
  const auto feats = random_features(rng, 3, {4});
  const std::vector<int> labels{0, 1, 0};

  SUBCASE("zero upstream gradient zeroes every parameter gradient") {
    MlpCache cache;
    mlp_forward(stack, feats, &cache);
    const auto grads = mlp_backward(stack, cache, {Matrix(3, 2)});
    for (const MlpLayer& g : grads[0]) {
      for (std::size_t i = 0; i < g.W.size(); ++i) CHECK(g.W.data()[i] == 0.0);
      for (double b : g.b) CHECK(b == 0.0);
    }
  }

  SUBCASE("whole-network gradient matches finite differences") {
    MlpCache cache;
    const auto out = mlp_forward(stack, feats, &cache);
    const FusionGrad fg = fusion_ce_forward_backward(out, labels, FusionHead::sum());
    const auto grads = mlp_backward(stack, cache, fg.d_outputs);

    std::vector<double> theta, flat;
    for (const MlpLayer& layer : stack.nets[0].layers) {
      theta.insert(theta.end(), layer.W.storage().begin(), layer.W.storage().end());
      theta.insert(theta.end(), layer.b.begin(), layer.b.end());
    }
    for (const MlpLayer& g : grads[0]) {
      flat.insert(flat.end(), g.W.storage().begin(), g.W.storage().end());
      flat.insert(flat.end(), g.b.begin(), g.b.end());
    }
    const auto f = [&](const std::vector<double>& t) {
      MlpStack s = stack;
      std::size_t pos = 0;
      for (MlpLayer& layer : s.nets[0].layers) {
        std::copy(t.begin() + pos, t.begin() + pos + layer.W.size(), layer.W.data());
        pos += layer.W.size();
        std::copy(t.begin() + pos, t.begin() + pos + layer.b.size(), layer.b.begin());
        pos += layer.b.size();
      }
      return fusion_ce_forward_backward(mlp_forward(s, feats), labels, FusionHead::sum()).loss;
    };
    CHECK(max_rel_err(flat, finite_diff_grad(f, theta)) < 1e-6);
  }

  SUBCASE("duplicated instance doubles its share of the gradient") {
    // batches {a,b} and {a,a,b}: un-meaning the reductions must satisfy
    // 3*g_aab - 2*g_ab = g_a
    const auto grad_of = [&](const std::vector<std::size_t>& rows) {
      std::vector<Matrix> batch{Matrix(rows.size(), 4)};
      std::vector<int> y(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int d = 0; d < 4; ++d) batch[0](r, d) = feats[0](rows[r], d);
        y[r] = labels[rows[r]];
      }
      MlpCache cache;
      const auto out = mlp_forward(stack, batch, &cache);
      const FusionGrad fg = fusion_ce_forward_backward(out, y, FusionHead::sum());
      return mlp_backward(stack, cache, fg.d_outputs);
    };
    const auto g_ab = grad_of({0, 1});
    const auto g_aab = grad_of({0, 0, 1});
    const auto g_a = grad_of({0});
    for (std::size_t l = 0; l < g_ab[0].size(); ++l)
      for (std::size_t i = 0; i < g_ab[0][l].W.size(); ++i) {
        const double lhs = 3.0 * g_aab[0][l].W.data()[i] - 2.0 * g_ab[0][l].W.data()[i];
        CHECK(lhs == doctest::Approx(g_a[0][l].W.data()[i]).epsilon(1e-9));
      }
  }
}

TEST_CASE("adam") {
  SUBCASE("hand-computed single step") {
    double theta = 1.0, grad = 1.0;
    AdamState adam(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    adam.step({{"theta", &theta, &grad, 1}});
    // bias-corrected m_hat = 1, v_hat = 1 -> theta = 1 - 0.1/(1 + 1e-8)
    CHECK(std::fabs(theta - 0.9) <= 1e-9);
  }

  SUBCASE("zero gradient with weight decay only shrinks") {
    double theta = 0.7, grad = 0.0;
    AdamState adam(AdamConfig{0.01, 0.9, 0.999, 1e-8, 1e-2});
    adam.step({{"theta", &theta, &grad, 1}});
    CHECK(theta < 0.7);
    CHECK(theta > 0.0);
  }

  SUBCASE("two identical steps decrease monotonically") {
    double theta = 1.0, grad = 0.5;
    AdamState adam(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    adam.step({{"theta", &theta, &grad, 1}});
    const double after_one = theta;
    adam.step({{"theta", &theta, &grad, 1}});
    CHECK(after_one < 1.0);
    CHECK(theta < after_one);
  }

  SUBCASE("lr = 0 changes nothing") {
    double theta = 0.42, grad = 3.0;
    AdamState adam(AdamConfig{0.0, 0.9, 0.999, 1e-8, 0.0});
    adam.step({{"theta", &theta, &grad, 1}});
    CHECK(theta == 0.42);
  }

  SUBCASE("non-finite gradient names the block") {
    double theta = 1.0, grad = std::nan("");
    AdamState adam;
    CHECK_THROWS_WITH_AS(adam.step({{"encoder.W", &theta, &grad, 1}}),
                         "adam: non-finite gradient in block encoder.W", std::runtime_error);
  }
}

namespace {

SplitData tiny_split(Rng& rng, int n, int dim, int modalities) {
  SplitData s;
  s.features.assign(modalities, Matrix(n, dim));
  s.labels.resize(n);
  for (int m = 0; m < modalities; ++m)
    for (double& v : s.features[m].storage()) v = rng.normal();
  for (int i = 0; i < n; ++i) s.labels[i] = static_cast<int>(rng.below(2));
  return s;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.hidden = {6};
  cfg.max_epochs = 4;
  cfg.patience = 10;
  cfg.batch_size = 16;
  cfg.lr = 1e-3;
  cfg.proxies = 3;
  return cfg;
}

}  // namespace

TEST_CASE("train loop") {
  Rng rng(6);
  const SplitData tr = tiny_split(rng, 40, 5, 2);
  const SplitData va = tiny_split(rng, 16, 5, 2);

  SUBCASE("patience 1 with a flat criterion stops after two epochs") {
    TrainConfig cfg = tiny_config();
    cfg.lr = 0.0;  // nothing improves
    cfg.patience = 1;
    cfg.max_epochs = 50;
    const TrainedModel model = train(tr, va, cfg);
    CHECK(model.history.size() == 2);
    CHECK(model.best_epoch == 0);
  }

  SUBCASE("same seed twice gives identical histories and weights") {
    TrainConfig cfg = tiny_config();
    cfg.seed = 77;
    const TrainedModel a = train(tr, va, cfg);
    const TrainedModel b = train(tr, va, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
      CHECK(a.history[e].train_loss == b.history[e].train_loss);
      CHECK(a.history[e].val_loss == b.history[e].val_loss);
      CHECK(a.history[e].val_acc == b.history[e].val_acc);
    }
    for (std::size_t m = 0; m < a.stack.nets.size(); ++m)
      for (std::size_t l = 0; l < a.stack.nets[m].layers.size(); ++l)
        for (std::size_t i = 0; i < a.stack.nets[m].layers[l].W.size(); ++i)
          CHECK(a.stack.nets[m].layers[l].W.data()[i] == b.stack.nets[m].layers[l].W.data()[i]);
  }

  SUBCASE("restored parameters are never worse than the best epoch") {
    TrainConfig cfg = tiny_config();
    cfg.max_epochs = 12;
    const TrainedModel model = train(tr, va, cfg);
    double best = model.history[0].val_loss;
    for (const EpochStats& s : model.history) best = std::min(best, s.val_loss);
    const ModalityOutputs out = model_outputs(model, va.features);
    CHECK(method_loss(model, out, va.labels) == doctest::Approx(best).epsilon(1e-12));
  }

  SUBCASE("empty split is rejected") {
    SplitData empty;
    empty.features.assign(2, Matrix(0, 5));
    CHECK_THROWS_AS(train(empty, va, tiny_config()), std::invalid_argument);
  }

  SUBCASE("separable toy set reaches training accuracy 1.0") {
    Rng toy_rng(7);
    const SplitData toy = separable_toy(toy_rng, 50, 4);
    REQUIRE(perceptron_separable(toy));
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.max_epochs = 200;
    cfg.patience = 200;
    cfg.batch_size = 16;
    cfg.lr = 5e-3;
    cfg.proxies = 3;
    cfg.criterion = EsCriterion::TrainLoss;
    const TrainedModel model = train(toy, toy, cfg);
    const std::vector<int> pred =
        predict_from_logits(model_logits(model, model_outputs(model, toy.features)));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == toy.labels[i];
    CHECK(hits == toy.size());
    CHECK(model.history.size() <= 200);
  }

  SUBCASE("every method kind trains end to end") {
    for (const std::string name :
         {"multimodal", "softtriple", "sum_ce", "nn_ce", "unimodal:2"}) {
      TrainConfig cfg = tiny_config();
      cfg.method = MethodSpec::parse(name);
      const TrainedModel model = train(tr, va, cfg);
      CHECK(model.history.size() >= 1);
      const ModalityOutputs out = model_outputs(model, va.features);
      CHECK(model_logits(model, out).rows() == va.size());
    }
    TrainConfig cfg = tiny_config();
    cfg.method = MethodSpec::parse("weighted_sum_ce");
    cfg.method.weights = {0.3, 0.7};
    const TrainedModel model = train(tr, va, cfg);
    CHECK(model.history.size() >= 1);
  }
}

TEST_CASE("lr grid search") {
  Rng rng(8);
  const SplitData tr = tiny_split(rng, 40, 5, 2);
  const SplitData va = tiny_split(rng, 16, 5, 2);

  SUBCASE("single-element grid returns that lr") {
    TrainConfig cfg = tiny_config();
    cfg.lr_grid = {3e-3};
    const LrGridResult res = lr_grid_search(tr, va, cfg);
    CHECK(res.best_lr == 3e-3);
    CHECK(res.cells.size() == 1);
    CHECK(res.cells[0].ok);
  }

  SUBCASE("a diverging cell is recorded, the search still returns a winner") {
    TrainConfig cfg = tiny_config();
    cfg.max_epochs = 8;
    cfg.lr_grid = {1e200, 1e-3};
    const LrGridResult res = lr_grid_search(tr, va, cfg);
    CHECK(res.best_lr == 1e-3);
    REQUIRE(res.cells.size() == 2);
    CHECK_FALSE(res.cells[0].ok);
    CHECK(!res.cells[0].error.empty());
    CHECK(res.cells[1].ok);
  }

  SUBCASE("winner has the best validation accuracy") {
    TrainConfig cfg = tiny_config();
    cfg.max_epochs = 6;
    cfg.lr_grid = {1e-2, 1e-3, 1e-4};
    const LrGridResult res = lr_grid_search(tr, va, cfg);
    double winner_acc = 0.0;
    for (const LrGridCell& cell : res.cells)
      if (cell.lr == res.best_lr) winner_acc = cell.val_acc;
    for (const LrGridCell& cell : res.cells)
      if (cell.ok) CHECK(winner_acc >= cell.val_acc);
  }

  SUBCASE("empty grid is rejected") {
    TrainConfig cfg = tiny_config();
    cfg.lr_grid = {};
    CHECK_THROWS_AS(lr_grid_search(tr, va, cfg), std::invalid_argument);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng rng(9);
  const SplitData tr = tiny_split(rng, 32, 5, 2);
  const SplitData va = tiny_split(rng, 12, 5, 2);
  TrainConfig cfg = tiny_config();
  cfg.method = MethodSpec::parse("multimodal");
  const TrainedModel model = train(tr, va, cfg);

  const std::string path =
      (std::filesystem::temp_directory_path() / "mml_ckpt_test.bin").string();
  save_checkpoint(model, path);
  const TrainedModel loaded = load_checkpoint(path);
  std::remove(path.c_str());

  REQUIRE(loaded.stack.nets.size() == model.stack.nets.size());
  for (std::size_t m = 0; m < model.stack.nets.size(); ++m)
    for (std::size_t l = 0; l < model.stack.nets[m].layers.size(); ++l) {
      const MlpLayer& a = model.stack.nets[m].layers[l];
      const MlpLayer& b = loaded.stack.nets[m].layers[l];
      REQUIRE(a.W.size() == b.W.size());
      for (std::size_t i = 0; i < a.W.size(); ++i) CHECK(a.W.data()[i] == b.W.data()[i]);
      for (std::size_t i = 0; i < a.b.size(); ++i) CHECK(a.b[i] == b.b[i]);
    }
  REQUIRE(loaded.bank.w.size() == model.bank.w.size());
  for (std::size_t m = 0; m < model.bank.w.size(); ++m)
    for (std::size_t i = 0; i < model.bank.w[m].size(); ++i)
      CHECK(loaded.bank.w[m].data()[i] == model.bank.w[m].data()[i]);
  CHECK(loaded.bank.gamma == model.bank.gamma);
  REQUIRE(loaded.history.size() == model.history.size());
  for (std::size_t e = 0; e < model.history.size(); ++e) {
    CHECK(loaded.history[e].train_loss == model.history[e].train_loss);
    CHECK(loaded.history[e].val_loss == model.history[e].val_loss);
    CHECK(loaded.history[e].val_acc == model.history[e].val_acc);
    CHECK(loaded.history[e].seconds == model.history[e].seconds);
  }
  CHECK(loaded.best_epoch == model.best_epoch);
  REQUIRE(loaded.adam.first_moments().size() == model.adam.first_moments().size());
  for (std::size_t b = 0; b < model.adam.first_moments().size(); ++b) {
    for (std::size_t i = 0; i < model.adam.first_moments()[b].size(); ++i) {
      CHECK(loaded.adam.first_moments()[b][i] == model.adam.first_moments()[b][i]);
      CHECK(loaded.adam.second_moments()[b][i] == model.adam.second_moments()[b][i]);
    }
  }
  CHECK(loaded.adam.step_count() == model.adam.step_count());
  CHECK(loaded.rng_state.s == model.rng_state.s);
  CHECK(loaded.rng_state.has_spare == model.rng_state.has_spare);
  CHECK(nlohmann::json(loaded.cfg).dump() == nlohmann::json(model.cfg).dump());
}

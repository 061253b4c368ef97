#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "opcnn/train.hpp"

using namespace opcnn;

namespace {

struct Toy {
  Vocab vocab;
  EncodedSet train, test;
  Hyperparams hyper;
};

Toy order_toy(std::size_t n_train, std::uint64_t seed) {
  Toy t;
  const Dataset tr = gen_order_task(n_train, 20, 3, derive_seed(seed, "train"));
  const Dataset te = gen_order_task(100, 20, 3, derive_seed(seed, "test"));
  t.vocab = build_vocab(std::span(&tr, 1), TokenizerMode::whitespace, 1);
  t.hyper.embedding_dim = 8;
  t.hyper.filter_widths = {2, 3};
  t.hyper.filters_per_width = 4;
  t.hyper.k = 3;
  t.hyper.dropout_p = 0.0;
  t.hyper.sentence_length = 20;
  t.train = encode_dataset(tr, t.vocab, TokenizerMode::whitespace, 20);
  t.test = encode_dataset(te, t.vocab, TokenizerMode::whitespace, 20);
  return t;
}

}  // namespace

TEST_CASE("encode_dataset") {
  Dataset d;
  d.documents = {{"a b", 1, 0}, {"c", 0, 0}};
  Vocab v;
  v.add("a");
  const auto e = encode_dataset(d, v, TokenizerMode::whitespace, 3);
  CHECK(e.ids == std::vector<std::vector<std::int32_t>>{{2, 1, 0}, {1, 0, 0}});
  CHECK(e.labels == std::vector<int>{1, 0});
  const std::vector<std::size_t> pick{1};
  CHECK(e.subset(pick).labels == std::vector<int>{0});
}

TEST_CASE("sgd step decays weights but not biases") {
  const auto h = tiny_hyperparams();
  auto m = OpcnnModel::zeros(h, 5);
  m.out_weight(0, 0) = 2.0;
  m.out_bias[0] = 2.0;
  m.pool_scale[0] = 2.0;
  m.embedding(0, 0) = 0.0;
  m.embedding(3, 1) = 2.0;
  auto g = Gradients::zeros_like(m);
  g.out_bias[0] = 1.0;
  sgd_step(m, g, 0.1, 0.5);
  CHECK(m.out_weight(0, 0) == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
  CHECK(m.pool_scale[0] == doctest::Approx(1.9));
  CHECK(m.out_bias[0] == doctest::Approx(1.9));
  CHECK(m.embedding(3, 1) == doctest::Approx(1.9));
  CHECK(m.embedding(0, 0) == 0.0);
}

TEST_CASE("sgd arithmetic") {
  const auto h = tiny_hyperparams();
  auto m = OpcnnModel::zeros(h, 5);
  m.out_weight(1, 2) = 1.0;
  m.conv[0].bias[0] = 1.0;
  auto g = Gradients::zeros_like(m);
  g.out_weight(1, 2) = 0.5;
  auto plain = m;
  sgd_step(plain, g, 0.1, 0.0);
  CHECK(plain.out_weight(1, 2) == doctest::Approx(0.95));
  auto decay = m;
  sgd_step(decay, Gradients::zeros_like(m), 0.1, 0.5);
  CHECK(decay.out_weight(1, 2) == doctest::Approx(0.95));
  CHECK(decay.conv[0].bias[0] == 1.0);
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  const auto t = order_toy(10, 1);
  const auto m = OpcnnModel::init(t.hyper, t.vocab.size(), 2);
  const std::vector<std::size_t> batch{3, 0, 7};
  double loss = 0.0;
  const auto g = batch_gradient(m, t.train, batch, {}, &loss);

  auto want = Gradients::zeros_like(m);
  double want_loss = 0.0;
  for (auto i : batch) {
    const auto [probs, trace] = forward(m, t.train.ids[i]);
    want += backward(m, trace, t.train.labels[i]);
    want_loss += cross_entropy(probs, t.train.labels[i]);
  }
  want *= 1.0 / 3.0;
  CHECK(g.out_weight == want.out_weight);
  REQUIRE(g.kernels.size() == want.kernels.size());
  for (std::size_t w = 0; w < g.kernels.size(); ++w) {
    const std::span<const double> a = g.kernels[w].values(), b = want.kernels[w].values();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  CHECK(loss == doctest::Approx(want_loss));
}

TEST_CASE("training is reproducible and learns the order task") {
  const auto t = order_toy(400, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.minibatch = 10;
  cfg.l2_lambda = 0.0;
  cfg.epochs = 15;
  cfg.seed = 4;
  auto a = OpcnnModel::init(t.hyper, t.vocab.size(), 9);
  auto b = a;
  const auto ha = train(a, t.train, t.test, cfg);
  const auto hb = train(b, t.train, t.test, cfg);
  CHECK(ha == hb);
  CHECK(a == b);
  REQUIRE(ha.epochs.size() == 15);
  CHECK(ha.epochs.back().loss < ha.epochs.front().loss);
  CHECK(ha.epochs.back().train_acc > 0.8);
}

TEST_CASE("patience stops early and restore_best keeps the best epoch") {
  const auto t = order_toy(200, 5);
  TrainConfig cfg;
  cfg.learning_rate = 1e-12;
  cfg.epochs = 50;
  cfg.patience = 3;
  cfg.eval_train = false;
  auto m = OpcnnModel::init(t.hyper, t.vocab.size(), 1);
  CHECK(train(m, t.train, t.test, cfg).epochs.size() == 4);

  cfg.learning_rate = 0.05;
  cfg.minibatch = 10;
  cfg.l2_lambda = 0.0;
  cfg.patience = 0;
  cfg.epochs = 8;
  cfg.restore_best = true;
  auto r = OpcnnModel::init(t.hyper, t.vocab.size(), 1);
  const auto hist = train(r, t.train, t.test, cfg);
  double best = 0.0;
  for (const auto& e : hist.epochs) best = std::max(best, e.valid_acc);
  CHECK(accuracy(evaluate(r, t.test)).value == best);
}

TEST_CASE("numeric blow-up is reported") {
  const auto t = order_toy(20, 6);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.epochs = 3;
  auto m = OpcnnModel::init(t.hyper, t.vocab.size(), 1);
  CHECK_THROWS_AS(train(m, t.train, t.test, cfg), NumericError);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.minibatch = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.validation_fraction = 1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("holdout split") {
  const auto s = holdout_split(100, 0.1, 3);
  CHECK(s.valid.size() == 10);
  CHECK(s.train.size() == 90);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.valid.begin(), s.valid.end());
  CHECK(all.size() == 100);
  CHECK(std::is_sorted(s.valid.begin(), s.valid.end()));
  CHECK(holdout_split(10, 0.0, 1).valid.empty());
}

TEST_CASE("cv sweep") {
  const auto t = order_toy(60, 7);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.minibatch = 10;
  cfg.epochs = 2;
  cfg.l2_lambda = 0.0;
  auto h1 = t.hyper;
  h1.k = 1;
  const std::vector<Hyperparams> grid{h1, t.hyper};
  const auto rows = cv_sweep(t.train, t.vocab.size(), grid, 3, 11, cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].fold_accuracy.size() == 3);
  CHECK(rows == cv_sweep(t.train, t.vocab.size(), grid, 3, 11, cfg));

  std::ostringstream out;
  write_sweep_csv(out, rows);
  CHECK(out.str().rfind("k,embedding_dim,filter_widths,filters_per_width,pooling_affine,dropout,folds,mean_acc,sd\n", 0) ==
        0);
  CHECK(out.str().find("\n1,8,2;3,4,1,0.000000,3,") != std::string::npos);
}

TEST_CASE("history csv") {
  TrainHistory h;
  h.epochs.push_back({1, 0.5, 0.75, std::numeric_limits<double>::quiet_NaN()});
  std::ostringstream out;
  write_history_csv(out, h);
  CHECK(out.str() == "epoch,loss,train_acc,valid_acc\n1,0.500000,0.750000,\n");
}

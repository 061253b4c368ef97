#include "opcnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace opcnn {

EncodedSet EncodedSet::subset(std::span<const std::size_t> indices) const {
  EncodedSet out;
  out.ids.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    out.ids.push_back(ids.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

EncodedSet encode_dataset(const Dataset& data, const Vocab& vocab, TokenizerMode mode, std::size_t n) {
  EncodedSet out;
  out.ids.reserve(data.size());
  out.labels.reserve(data.size());
  for (const auto& doc : data.documents) {
    out.ids.push_back(encode(tokenize(doc.text, mode), vocab, n));
    out.labels.push_back(doc.label);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
  if (!(l2_lambda >= 0.0)) throw std::invalid_argument("l2_lambda must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("validation_fraction must be in [0, 1)");
}

bool EpochStats::operator==(const EpochStats& o) const {
  auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  return epoch == o.epoch && same(loss, o.loss) && same(train_acc, o.train_acc) && same(valid_acc, o.valid_acc);
}

namespace {

void decay_step(std::span<double> theta, std::span<const double> grad, double lr, double l2) {
  if (theta.size() != grad.size()) throw ShapeError("sgd_step: gradient shape does not match parameters");
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * (grad[i] + l2 * theta[i]);
}

}  // namespace

void sgd_step(OpcnnModel& model, const Gradients& grads, double lr, double l2_lambda) {
  if (grads.kernels.size() != model.conv.size() || grads.pool_scale.size() != model.pool_scale.size()) {
    throw ShapeError("sgd_step: gradient structure does not match model");
  }
  for (std::size_t g = 0; g < model.conv.size(); ++g) {
    decay_step(model.conv[g].kernels.values(), grads.kernels[g].values(), lr, l2_lambda);
    decay_step(model.conv[g].bias, grads.conv_bias[g], lr, 0.0);
  }
  if (model.hyper.pooling_affine) {
    decay_step(model.pool_scale, grads.pool_scale, lr, l2_lambda);
    decay_step(model.pool_bias, grads.pool_bias, lr, 0.0);
  }
  decay_step(model.out_weight.values(), grads.out_weight.values(), lr, l2_lambda);
  decay_step(model.out_bias, grads.out_bias, lr, 0.0);

  if (!model.hyper.trainable_embeddings) return;
  const std::size_t m = model.hyper.embedding_dim;
  if (l2_lambda != 0.0 && lr != 0.0) {
    const double factor = 1.0 - lr * l2_lambda;
    auto rows = model.embedding.values().subspan(m);
    for (double& v : rows) v *= factor;
  }
  for (const auto& [id, row] : grads.embedding_rows) {
    if (id <= 0 || static_cast<std::size_t>(id) >= model.embedding.rows()) {
      throw ShapeError("sgd_step: embedding gradient row " + std::to_string(id) + " out of range");
    }
    axpy(-lr, row, model.embedding.row(static_cast<std::size_t>(id)));
  }
}

Gradients batch_gradient(const OpcnnModel& model, const EncodedSet& data, std::span<const std::size_t> batch,
                         std::span<const Vector> masks, double* loss_sum) {
  if (!masks.empty() && masks.size() != batch.size()) throw std::invalid_argument("one dropout mask per sample");
  Gradients total = Gradients::zeros_like(model);
  ForwardTrace trace;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::size_t i = batch[b];
    std::optional<std::span<const double>> mask;
    if (!masks.empty()) mask = std::span<const double>(masks[b]);
    forward_into(model, data.ids[i], mask, trace);
    if (loss_sum) *loss_sum += cross_entropy(trace.probs, data.labels[i]);
    backward_into(model, trace, data.labels[i], total);
  }
  if (!batch.empty()) total *= 1.0 / static_cast<double>(batch.size());
  return total;
}

HoldoutSplit holdout_split(std::size_t size, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must be in [0, 1)");
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));
  const auto n_valid = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(size)));
  HoldoutSplit split;
  split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_valid));
  split.valid.assign(order.end() - static_cast<std::ptrdiff_t>(n_valid), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.valid.begin(), split.valid.end());
  return split;
}

std::vector<int> predict(const OpcnnModel& model, const EncodedSet& data) {
  std::vector<int> out(data.size());
  ForwardTrace trace;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward_into(model, data.ids[i], std::nullopt, trace);
    out[i] = trace.probs[1] > trace.probs[0] ? 1 : 0;
  }
  return out;
}

ConfusionCounts evaluate(const OpcnnModel& model, const EncodedSet& data) {
  const auto preds = predict(model, data);
  return confusion(preds, data.labels);
}

TrainHistory train(OpcnnModel& model, const EncodedSet& train_input, const EncodedSet& valid_set,
                   const TrainConfig& config) {
  config.validate();
  if (train_input.empty()) throw std::invalid_argument("train: empty training set");

  EncodedSet balanced;
  const EncodedSet* train_set = &train_input;
  if (config.balance) {
    balanced = train_input.subset(balanced_indices(train_input.labels, derive_seed(config.seed, "balance")));
    if (balanced.empty()) throw std::invalid_argument("train: balancing left no training data");
    train_set = &balanced;
  }

  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  std::vector<std::size_t> order(train_set->size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  double best_valid = -1.0;
  std::size_t since_best = 0;
  std::optional<OpcnnModel> best_model;
  std::vector<Vector> masks;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.minibatch) {
      const std::size_t len = std::min(config.minibatch, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      masks.clear();
      if (model.hyper.dropout_p > 0.0) {
        for (std::size_t b = 0; b < len; ++b)
          masks.push_back(make_dropout_mask(model.hyper.concat_size(), model.hyper.dropout_p, dropout_rng));
      }
      const Gradients grads = batch_gradient(model, *train_set, batch, masks, &loss_sum);
      if (!grads.all_finite()) throw NumericError("non-finite gradient in epoch " + std::to_string(epoch));
      sgd_step(model, grads, config.learning_rate, config.l2_lambda);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(stats.loss)) throw NumericError("training loss diverged in epoch " + std::to_string(epoch));
    if (config.eval_train) stats.train_acc = accuracy(evaluate(model, *train_set)).value;
    if (!valid_set.empty()) stats.valid_acc = accuracy(evaluate(model, valid_set)).value;
    history.epochs.push_back(stats);

    if (!valid_set.empty() && (config.patience > 0 || config.restore_best)) {
      if (stats.valid_acc > best_valid) {
        best_valid = stats.valid_acc;
        since_best = 0;
        if (config.restore_best) best_model = model;
      } else if (++since_best >= config.patience && config.patience > 0) {
        break;
      }
    }
  }
  if (best_model) model = std::move(*best_model);
  return history;
}

std::vector<SweepRow> cv_sweep(const EncodedSet& data, std::size_t vocab_size, std::span<const Hyperparams> grid,
                               const Folds& folds, std::uint64_t seed, const TrainConfig& config) {
  if (grid.empty()) throw std::invalid_argument("cv_sweep: empty hyperparameter grid");
  if (folds.size() < 2) throw std::invalid_argument("cv_sweep: need at least two folds");
  std::vector<SweepRow> rows;
  for (const auto& hyper : grid) {
    SweepRow row;
    row.hyper = hyper;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> train_idx;
      for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
      std::sort(train_idx.begin(), train_idx.end());
      const std::uint64_t fold_seed = derive_seed(seed, "fold" + std::to_string(f));
      EncodedSet inner_valid;
      if (config.validation_fraction > 0.0) {
        const auto split = holdout_split(train_idx.size(), config.validation_fraction, derive_seed(fold_seed, "holdout"));
        std::vector<std::size_t> tr, va;
        for (auto i : split.train) tr.push_back(train_idx[i]);
        for (auto i : split.valid) va.push_back(train_idx[i]);
        train_idx = std::move(tr);
        inner_valid = data.subset(va);
      }
      const EncodedSet train_set = data.subset(train_idx);
      const EncodedSet held_out = data.subset(folds[f]);
      OpcnnModel model = OpcnnModel::init(hyper, vocab_size, derive_seed(fold_seed, "init"));
      TrainConfig cfg = config;
      cfg.seed = fold_seed;
      cfg.eval_train = false;
      train(model, train_set, inner_valid, cfg);
      row.fold_accuracy.push_back(accuracy(evaluate(model, held_out)).value);
    }
    const double n = static_cast<double>(row.fold_accuracy.size());
    row.mean = std::accumulate(row.fold_accuracy.begin(), row.fold_accuracy.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : row.fold_accuracy) ss += (a - row.mean) * (a - row.mean);
    row.sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> cv_sweep(const EncodedSet& data, std::size_t vocab_size, std::span<const Hyperparams> grid,
                               std::size_t folds, std::uint64_t seed, const TrainConfig& config) {
  return cv_sweep(data, vocab_size, grid, kfold_indices(data.size(), folds, derive_seed(seed, "folds")), seed, config);
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,loss,train_acc,valid_acc\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << fmt(e.loss) << ',' << fmt(e.train_acc) << ',' << fmt(e.valid_acc) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "k,embedding_dim,filter_widths,filters_per_width,pooling_affine,dropout,folds,mean_acc,sd\n";
  for (const auto& r : rows) {
    std::string widths;
    for (auto w : r.hyper.filter_widths) widths += (widths.empty() ? "" : ";") + std::to_string(w);
    out << r.hyper.k << ',' << r.hyper.embedding_dim << ',' << widths << ',' << r.hyper.filters_per_width << ','
        << (r.hyper.pooling_affine ? 1 : 0) << ',' << fmt(r.hyper.dropout_p) << ',' << r.fold_accuracy.size() << ','
        << fmt(r.mean) << ',' << fmt(r.sd) << '\n';
  }
}

}  // namespace opcnn

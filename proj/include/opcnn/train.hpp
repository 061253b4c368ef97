#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "opcnn/corpus.hpp"
#include "opcnn/metrics.hpp"
#include "opcnn/nn.hpp"

namespace opcnn {

/// Documents already turned into fixed-length id sequences.
struct EncodedSet {
  std::vector<std::vector<std::int32_t>> ids;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  EncodedSet subset(std::span<const std::size_t> indices) const;
};

EncodedSet encode_dataset(const Dataset& data, const Vocab& vocab, TokenizerMode mode, std::size_t n);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 20;
  std::size_t minibatch = 50;
  /// Coefficient lambda of the lambda * theta term added to weight gradients.
  double l2_lambda = 0.5;
  std::uint64_t seed = 1;
  bool shuffle = true;
  /// Downsample the majority class of the training set before training.
  bool balance = false;
  /// Stop after this many epochs without held-out improvement; 0 disables.
  std::size_t patience = 0;
  /// On return, leave the model at the epoch with the best held-out accuracy.
  bool restore_best = false;
  /// Share of the training folds cv_sweep sets aside as validation for
  /// patience and restore_best. 0 means no inner validation set.
  double validation_fraction = 0.0;
  /// Score the training set in inference mode after each epoch.
  bool eval_train = true;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;  ///< mean training cross-entropy during the epoch
  double train_acc = std::numeric_limits<double>::quiet_NaN();
  double valid_acc = std::numeric_limits<double>::quiet_NaN();

  bool operator==(const EpochStats& o) const;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  bool operator==(const TrainHistory&) const = default;
};

/// theta <- theta - lr * (g + l2 * theta) for kernels, pooling scales, output
/// weights and trainable embeddings (pad row excluded); biases get no decay.
void sgd_step(OpcnnModel& model, const Gradients& grads, double lr, double l2_lambda);

/// Mean of per-sample gradients over `batch`, summed in the order given.
/// `masks` holds one dropout mask per sample, or is empty for no dropout.
Gradients batch_gradient(const OpcnnModel& model, const EncodedSet& data, std::span<const std::size_t> batch,
                         std::span<const Vector> masks, double* loss_sum = nullptr);

struct HoldoutSplit {
  std::vector<std::size_t> train, valid;
};

/// Seeded shuffle of [0, size), the last round(fraction * size) indices go to
/// valid. Both halves come back sorted.
HoldoutSplit holdout_split(std::size_t size, double fraction, std::uint64_t seed);

std::vector<int> predict(const OpcnnModel& model, const EncodedSet& data);
ConfusionCounts evaluate(const OpcnnModel& model, const EncodedSet& data);

/// Mini-batch SGD. Each epoch shuffles with a seed derived from config.seed,
/// trains every batch including the last partial one, and logs metrics.
/// Randomness streams: "shuffle", "dropout", "balance".
TrainHistory train(OpcnnModel& model, const EncodedSet& train_set, const EncodedSet& valid_set,
                   const TrainConfig& config);

struct SweepRow {
  Hyperparams hyper;
  std::vector<double> fold_accuracy;
  double mean = 0.0;
  double sd = 0.0;  ///< sample standard deviation over folds
  bool operator==(const SweepRow&) const = default;
};

/// For each grid point trains one model per held-out fold (initialised from
/// derive_seed(seed, "init")) and reports the held-out accuracies.
std::vector<SweepRow> cv_sweep(const EncodedSet& data, std::size_t vocab_size, std::span<const Hyperparams> grid,
                               std::size_t folds, std::uint64_t seed, const TrainConfig& config);

/// Same, on caller-provided folds.
std::vector<SweepRow> cv_sweep(const EncodedSet& data, std::size_t vocab_size, std::span<const Hyperparams> grid,
                               const Folds& folds, std::uint64_t seed, const TrainConfig& config);

/// Header: epoch,loss,train_acc,valid_acc
void write_history_csv(std::ostream& out, const TrainHistory& history);
/// Header: k,embedding_dim,filter_widths,filters_per_width,pooling_affine,dropout,folds,mean_acc,sd
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace opcnn

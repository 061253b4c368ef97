#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "opcnn/corpus.hpp"

namespace opcnn {

/// (feature id, value) pairs with strictly increasing ids and nonzero values.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }
  double norm() const;
  bool operator==(const SparseVector&) const = default;
};

/// Feature dictionary fitted on the training split only.
class FeatureVocab {
 public:
  /// Returns -1 for unseen features.
  std::int64_t id(const std::string& feature) const;
  std::uint32_t add(const std::string& feature);
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::uint32_t id) const { return names_.at(id); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct TfidfTable {
  FeatureVocab vocab;
  std::vector<double> idf;
  std::size_t training_docs = 0;
};

/// idf = ln((1 + N) / (1 + df)) + 1 over the N training documents.
TfidfTable fit_tfidf(std::span<const std::vector<std::string>> training_docs);

/// Raw term count times idf, L2-normalised. Unknown tokens are ignored.
std::vector<SparseVector> tfidf_features(std::span<const std::vector<std::string>> docs, const TfidfTable& table);

enum class BigramWeighting { counts, presence };

/// Adjacent pairs joined with '_'. A single-token document has none.
std::vector<std::string> bigrams(std::span<const std::string> tokens);

FeatureVocab fit_bigram_vocab(std::span<const std::vector<std::string>> training_docs);

/// Bigram counts (or 0/1 presence), L2-normalised.
std::vector<SparseVector> bigram_features(std::span<const std::vector<std::string>> docs, const FeatureVocab& vocab,
                                          BigramWeighting weighting = BigramWeighting::counts);

/// Sparse text dump, one document per line: `label id:value id:value ...`.
void write_sparse(std::ostream& out, std::span<const SparseVector> features, std::span<const int> labels);

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;

  std::size_t dim() const { return weights.size(); }
};

struct SvmOptions {
  double lambda = 1e-4;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
};

/// Pegasos: primal hinge-loss stochastic subgradient descent with step
/// 1/(lambda t). The bias is an extra always-on feature and is regularised
/// with the weights. Labels must be -1 or +1.
LinearModel svm_train(std::span<const SparseVector> features, std::span<const int> labels, std::size_t dim,
                      const SvmOptions& options);

struct SvmPrediction {
  int label = 1;
  double score = 0.0;
};

/// sign(w.x + b) with a zero score resolving to +1.
SvmPrediction svm_predict(const LinearModel& model, const SparseVector& x);

/// lambda/2 |w|^2 + mean hinge loss (bias included in |w|).
double svm_objective(const LinearModel& model, std::span<const SparseVector> features, std::span<const int> labels,
                     double lambda);
double mean_hinge_loss(const LinearModel& model, std::span<const SparseVector> features, std::span<const int> labels);

}  // namespace opcnn

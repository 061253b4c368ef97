#include "opcnn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "opcnn/rng.hpp"

namespace opcnn {

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [_, v] : entries) s += v * v;
  return std::sqrt(s);
}

std::int64_t FeatureVocab::id(const std::string& feature) const {
  auto it = ids_.find(feature);
  return it == ids_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::uint32_t FeatureVocab::add(const std::string& feature) {
  auto [it, inserted] = ids_.emplace(feature, static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.push_back(feature);
  return it->second;
}

namespace {

SparseVector normalized(const std::map<std::uint32_t, double>& weights) {
  SparseVector v;
  double sq = 0.0;
  for (const auto& [id, w] : weights) {
    if (w != 0.0) {
      v.entries.emplace_back(id, w);
      sq += w * w;
    }
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& e : v.entries) e.second *= inv;
  }
  return v;
}

}  // namespace

TfidfTable fit_tfidf(std::span<const std::vector<std::string>> training_docs) {
  TfidfTable table;
  table.training_docs = training_docs.size();
  std::vector<std::size_t> df;
  for (const auto& doc : training_docs) {
    std::vector<std::uint32_t> seen;
    for (const auto& tok : doc) {
      const auto id = table.vocab.add(tok);
      if (id >= df.size()) df.resize(id + 1, 0);
      seen.push_back(id);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto id : seen) ++df[id];
  }
  const double n = static_cast<double>(table.training_docs);
  table.idf.resize(df.size());
  for (std::size_t i = 0; i < df.size(); ++i) {
    table.idf[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }
  return table;
}

std::vector<SparseVector> tfidf_features(std::span<const std::vector<std::string>> docs, const TfidfTable& table) {
  std::vector<SparseVector> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    std::map<std::uint32_t, double> tf;
    for (const auto& tok : doc) {
      const auto id = table.vocab.id(tok);
      if (id >= 0) tf[static_cast<std::uint32_t>(id)] += 1.0;
    }
    for (auto& [id, w] : tf) w *= table.idf[id];
    out.push_back(normalized(tf));
  }
  return out;
}

std::vector<std::string> bigrams(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < tokens.size(); ++i) out.push_back(tokens[i - 1] + "_" + tokens[i]);
  return out;
}

FeatureVocab fit_bigram_vocab(std::span<const std::vector<std::string>> training_docs) {
  FeatureVocab vocab;
  for (const auto& doc : training_docs)
    for (const auto& b : bigrams(doc)) vocab.add(b);
  return vocab;
}

std::vector<SparseVector> bigram_features(std::span<const std::vector<std::string>> docs, const FeatureVocab& vocab,
                                          BigramWeighting weighting) {
  std::vector<SparseVector> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    std::map<std::uint32_t, double> counts;
    for (const auto& b : bigrams(doc)) {
      const auto id = vocab.id(b);
      if (id < 0) continue;
      double& c = counts[static_cast<std::uint32_t>(id)];
      c = weighting == BigramWeighting::presence ? 1.0 : c + 1.0;
    }
    out.push_back(normalized(counts));
  }
  return out;
}

void write_sparse(std::ostream& out, std::span<const SparseVector> features, std::span<const int> labels) {
  if (features.size() != labels.size()) throw std::invalid_argument("write_sparse: features/labels length mismatch");
  char buf[64];
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << labels[i];
    for (const auto& [id, v] : features[i].entries) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", id, v);
      out << buf;
    }
    out << '\n';
  }
}

namespace {

void check_ids(const SparseVector& x, std::size_t dim) {
  if (!x.entries.empty() && x.entries.back().first >= dim) {
    throw std::out_of_range("feature id " + std::to_string(x.entries.back().first) + " outside model dimension " +
                            std::to_string(dim));
  }
}

}  // namespace

LinearModel svm_train(std::span<const SparseVector> features, std::span<const int> labels, std::size_t dim,
                      const SvmOptions& options) {
  if (!(options.lambda > 0.0)) throw std::invalid_argument("svm_train: lambda must be positive");
  if (features.empty()) throw std::invalid_argument("svm_train: no training examples");
  if (features.size() != labels.size()) throw std::invalid_argument("svm_train: features/labels length mismatch");
  for (int y : labels)
    if (y != -1 && y != 1) throw std::invalid_argument("svm_train: labels must be -1 or +1, got " + std::to_string(y));
  for (const auto& x : features) check_ids(x, dim);

  // w = scale * v, so the shrinkage step is O(1). Index dim holds the bias.
  std::vector<double> v(dim + 1, 0.0);
  double scale = 1.0;
  std::vector<std::size_t> order(features.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(options.seed);
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t i : order) {
      ++t;
      const SparseVector& x = features[i];
      const double y = labels[i];
      double margin = v[dim];
      for (const auto& [id, val] : x.entries) margin += v[id] * val;
      margin *= scale * y;

      const double eta = 1.0 / (options.lambda * static_cast<double>(t));
      const double shrink = 1.0 - 1.0 / static_cast<double>(t);
      if (shrink == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (margin < 1.0) {
        const double step = eta * y / scale;
        for (const auto& [id, val] : x.entries) v[id] += step * val;
        v[dim] += step;
      }
      if (scale < 1e-9) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
    }
  }
  LinearModel model;
  model.weights.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) model.weights[j] = v[j] * scale;
  model.bias = v[dim] * scale;
  return model;
}

SvmPrediction svm_predict(const LinearModel& model, const SparseVector& x) {
  check_ids(x, model.dim());
  double score = model.bias;
  for (const auto& [id, val] : x.entries) score += model.weights[id] * val;
  return {score >= 0.0 ? 1 : -1, score};
}

double mean_hinge_loss(const LinearModel& model, std::span<const SparseVector> features, std::span<const int> labels) {
  if (features.empty()) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    loss += std::max(0.0, 1.0 - labels[i] * svm_predict(model, features[i]).score);
  }
  return loss / static_cast<double>(features.size());
}

double svm_objective(const LinearModel& model, std::span<const SparseVector> features, std::span<const int> labels,
                     double lambda) {
  double sq = model.bias * model.bias;
  for (double w : model.weights) sq += w * w;
  return 0.5 * lambda * sq + mean_hinge_loss(model, features, labels);
}

}  // namespace opcnn

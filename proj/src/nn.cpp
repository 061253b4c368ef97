#include "opcnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace opcnn {

PoolActivation parse_pool_activation(std::string_view name) {
  if (name == "relu") return PoolActivation::relu;
  if (name == "identity") return PoolActivation::identity;
  throw std::invalid_argument("unknown pooling activation '" + std::string(name) + "' (expected relu|identity)");
}

std::string_view to_string(PoolActivation a) { return a == PoolActivation::relu ? "relu" : "identity"; }

Hyperparams Hyperparams::as_max_pool_cnn() const {
  Hyperparams h = *this;
  h.k = 1;
  h.pooling_affine = false;
  return h;
}

std::size_t Hyperparams::max_width() const {
  return filter_widths.empty() ? 0 : *std::max_element(filter_widths.begin(), filter_widths.end());
}

void Hyperparams::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("hyperparameters: " + msg); };
  if (embedding_dim < 1) fail("embedding_dim must be >= 1");
  if (filter_widths.empty()) fail("filter_widths must not be empty");
  for (std::size_t i = 0; i < filter_widths.size(); ++i) {
    if (filter_widths[i] < 1) fail("filter widths must be >= 1");
    if (i > 0 && filter_widths[i] <= filter_widths[i - 1]) fail("filter_widths must be strictly ascending");
  }
  if (filters_per_width < 1) fail("filters_per_width must be >= 1");
  if (k < 1) fail("k must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout must lie in [0, 1)");
  if (sentence_length < max_width()) {
    fail("sentence_length " + std::to_string(sentence_length) + " is shorter than the widest filter (" +
         std::to_string(max_width()) + ")");
  }
}

namespace {

Vector uniform_vector(std::size_t n, double bound, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return v;
}

}  // namespace

OpcnnModel OpcnnModel::zeros(const Hyperparams& hyper, std::size_t vocab_size) {
  hyper.validate();
  if (vocab_size < 2) throw std::invalid_argument("vocabulary must hold at least the two reserved ids");
  OpcnnModel m;
  m.hyper = hyper;
  m.embedding = Matrix(vocab_size, hyper.embedding_dim);
  for (auto w : hyper.filter_widths) {
    m.conv.push_back({w, Matrix(hyper.filters_per_width, w * hyper.embedding_dim), Vector(hyper.filters_per_width)});
  }
  m.pool_scale.assign(hyper.feature_maps(), 0.0);
  m.pool_bias.assign(hyper.feature_maps(), 0.0);
  m.out_weight = Matrix(2, hyper.concat_size());
  m.out_bias.assign(2, 0.0);
  return m;
}

OpcnnModel OpcnnModel::init(const Hyperparams& hyper, std::size_t vocab_size, std::uint64_t seed) {
  OpcnnModel m = zeros(hyper, vocab_size);
  const std::size_t dim = hyper.embedding_dim;
  const Vector emb = uniform_vector(vocab_size * dim, std::sqrt(6.0 / static_cast<double>(1 + dim)),
                                    derive_seed(seed, "embedding"));
  std::copy(emb.begin() + static_cast<std::ptrdiff_t>(dim), emb.end(), m.embedding.values().begin() + static_cast<std::ptrdiff_t>(dim));
  for (auto& g : m.conv) {
    const std::uint64_t gseed = derive_seed(seed, "kernel" + std::to_string(g.width));
    for (std::size_t f = 0; f < hyper.filters_per_width; ++f) {
      const Matrix k = xavier_init(g.width, dim, derive_seed(gseed, std::to_string(f)));
      std::copy(k.values().begin(), k.values().end(), g.kernels.row(f).begin());
    }
  }
  m.pool_scale.assign(hyper.feature_maps(), 1.0);
  m.out_weight = xavier_init(2, hyper.concat_size(), derive_seed(seed, "output"));
  return m;
}

Matrix embed_lookup(std::span<const std::int32_t> ids, const Matrix& embedding) {
  Matrix out(ids.size(), embedding.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= embedding.rows()) {
      throw std::out_of_range("token id " + std::to_string(ids[t]) + " outside embedding table of " +
                              std::to_string(embedding.rows()) + " rows");
    }
    auto src = embedding.row(static_cast<std::size_t>(ids[t]));
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

Vector conv_valid(const Matrix& sentence, const Matrix& kernel, double bias) {
  if (kernel.cols() != sentence.cols()) {
    throw ShapeError("kernel " + kernel.shape_string() + " does not match sentence width " + sentence.shape_string());
  }
  if (kernel.rows() > sentence.rows() || kernel.rows() == 0) {
    throw ShapeError("kernel " + kernel.shape_string() + " taller than sentence " + sentence.shape_string());
  }
  Vector out(sentence.rows() - kernel.rows() + 1);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::max(0.0, frobenius_window_dot(sentence, kernel, j) + bias);
  }
  return out;
}

namespace {

void kmax_into(std::span<const double> s, std::size_t k, PooledSelection& out) {
  out.values.assign(k, 0.0);
  out.indices.assign(k, PooledSelection::kPadSlot);
  if (s.size() <= k) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out.values[i] = s[i];
      out.indices[i] = static_cast<std::ptrdiff_t>(i);
    }
    return;
  }
  // Best-first list ordered by (value desc, index asc). Scanning in index
  // order means an equal value never displaces an earlier one.
  std::vector<std::ptrdiff_t>& best = out.indices;
  std::size_t count = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double v = s[j];
    if (count == k && !(v > s[static_cast<std::size_t>(best[k - 1])])) continue;
    std::size_t pos = count < k ? count : k - 1;
    while (pos > 0 && v > s[static_cast<std::size_t>(best[pos - 1])]) {
      best[pos] = best[pos - 1];
      --pos;
    }
    best[pos] = static_cast<std::ptrdiff_t>(j);
    if (count < k) ++count;
  }
  std::sort(best.begin(), best.end());
  for (std::size_t i = 0; i < k; ++i) out.values[i] = s[static_cast<std::size_t>(best[i])];
}

}  // namespace

PooledSelection kmax_order_pool(std::span<const double> s, std::size_t k) {
  if (k == 0) throw std::invalid_argument("kmax_order_pool: k must be >= 1");
  PooledSelection out;
  kmax_into(s, k, out);
  return out;
}

Vector pool_affine(std::span<const double> values, double scale, double bias, PoolActivation activation) {
  Vector out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double z = scale * values[i] + bias;
    out[i] = activation == PoolActivation::relu ? std::max(0.0, z) : z;
  }
  return out;
}

Vector softmax(std::span<const double> logits) {
  Vector p(logits.size());
  if (logits.empty()) return p;
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - hi));
  for (double& v : p) v /= sum;
  return p;
}

Vector make_dropout_mask(std::size_t size, double p, Rng& rng) {
  Vector mask(size, 1.0);
  if (p <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

void forward_into(const OpcnnModel& model, std::span<const std::int32_t> ids,
                  std::optional<std::span<const double>> dropout_mask, ForwardTrace& trace) {
  const Hyperparams& hp = model.hyper;
  if (ids.size() != hp.sentence_length) {
    throw ShapeError("input has " + std::to_string(ids.size()) + " ids, model expects " +
                     std::to_string(hp.sentence_length));
  }
  trace.ids.assign(ids.begin(), ids.end());
  trace.sentence = embed_lookup(ids, model.embedding);
  const std::size_t n = ids.size();
  const std::size_t k = hp.k;
  trace.filters.resize(hp.feature_maps());
  trace.concat.assign(hp.concat_size(), 0.0);

  std::size_t fi = 0;
  for (const auto& group : model.conv) {
    const std::size_t h = group.width;
    const std::size_t positions = n - h + 1;
    for (std::size_t f = 0; f < hp.filters_per_width; ++f, ++fi) {
      FilterTrace& ft = trace.filters[fi];
      const auto kernel = group.kernels.row(f);
      ft.pre.resize(positions);
      ft.act.resize(positions);
      for (std::size_t j = 0; j < positions; ++j) {
        ft.pre[j] = dot(trace.sentence.rows_span(j, h), kernel) + group.bias[f];
        ft.act[j] = std::max(0.0, ft.pre[j]);
      }
      kmax_into(ft.act, k, ft.pooled);
      if (hp.pooling_affine) {
        ft.affine_pre.resize(k);
        ft.out.resize(k);
        for (std::size_t s = 0; s < k; ++s) {
          const double z = model.pool_scale[fi] * ft.pooled.values[s] + model.pool_bias[fi];
          ft.affine_pre[s] = z;
          ft.out[s] = hp.pool_activation == PoolActivation::relu ? std::max(0.0, z) : z;
        }
      } else {
        ft.affine_pre.clear();
        ft.out = ft.pooled.values;
      }
      std::copy(ft.out.begin(), ft.out.end(), trace.concat.begin() + static_cast<std::ptrdiff_t>(fi * k));
    }
  }

  if (dropout_mask) {
    if (dropout_mask->size() != trace.concat.size()) {
      throw ShapeError("dropout mask length " + std::to_string(dropout_mask->size()) + " != concat length " +
                       std::to_string(trace.concat.size()));
    }
    trace.dropout_mask.assign(dropout_mask->begin(), dropout_mask->end());
    trace.hidden.resize(trace.concat.size());
    for (std::size_t i = 0; i < trace.concat.size(); ++i) trace.hidden[i] = trace.concat[i] * trace.dropout_mask[i];
  } else {
    trace.dropout_mask.clear();
    trace.hidden = trace.concat;
  }

  trace.logits.resize(2);
  for (std::size_t c = 0; c < 2; ++c) trace.logits[c] = dot(model.out_weight.row(c), trace.hidden) + model.out_bias[c];
  trace.probs = softmax(trace.logits);
}

std::pair<Vector, ForwardTrace> forward(const OpcnnModel& model, std::span<const std::int32_t> ids,
                                        std::optional<std::span<const double>> dropout_mask) {
  ForwardTrace trace;
  forward_into(model, ids, dropout_mask, trace);
  Vector probs = trace.probs;
  return {std::move(probs), std::move(trace)};
}

double cross_entropy(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw std::out_of_range("label " + std::to_string(label) + " outside distribution");
  }
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-12));
}

Gradients Gradients::zeros_like(const OpcnnModel& model) {
  Gradients g;
  for (const auto& group : model.conv) {
    g.kernels.emplace_back(group.kernels.rows(), group.kernels.cols());
    g.conv_bias.emplace_back(group.bias.size(), 0.0);
  }
  g.pool_scale.assign(model.pool_scale.size(), 0.0);
  g.pool_bias.assign(model.pool_bias.size(), 0.0);
  g.out_weight = Matrix(model.out_weight.rows(), model.out_weight.cols());
  g.out_bias.assign(model.out_bias.size(), 0.0);
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (kernels.size() != other.kernels.size() || out_weight.size() != other.out_weight.size() ||
      pool_scale.size() != other.pool_scale.size()) {
    throw ShapeError("gradient structures differ");
  }
  for (std::size_t g = 0; g < kernels.size(); ++g) {
    axpy(1.0, other.kernels[g].values(), kernels[g].values());
    axpy(1.0, other.conv_bias[g], conv_bias[g]);
  }
  axpy(1.0, other.pool_scale, pool_scale);
  axpy(1.0, other.pool_bias, pool_bias);
  axpy(1.0, other.out_weight.values(), out_weight.values());
  axpy(1.0, other.out_bias, out_bias);
  for (const auto& [id, row] : other.embedding_rows) {
    auto [it, inserted] = embedding_rows.try_emplace(id, row);
    if (!inserted) axpy(1.0, row, it->second);
  }
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  auto scale = [s](std::span<double> v) {
    for (double& x : v) x *= s;
  };
  for (auto& k : kernels) scale(k.values());
  for (auto& b : conv_bias) scale(b);
  scale(pool_scale);
  scale(pool_bias);
  scale(out_weight.values());
  scale(out_bias);
  for (auto& [_, row] : embedding_rows) scale(row);
  return *this;
}

bool Gradients::all_finite() const {
  for (const auto& k : kernels)
    if (!opcnn::all_finite(k.values())) return false;
  for (const auto& b : conv_bias)
    if (!opcnn::all_finite(b)) return false;
  for (const auto& [_, row] : embedding_rows)
    if (!opcnn::all_finite(row)) return false;
  return opcnn::all_finite(pool_scale) && opcnn::all_finite(pool_bias) && opcnn::all_finite(out_weight.values()) &&
         opcnn::all_finite(out_bias);
}

namespace {

void check_trace(const OpcnnModel& model, const ForwardTrace& trace) {
  const Hyperparams& hp = model.hyper;
  if (trace.filters.size() != hp.feature_maps() || trace.concat.size() != hp.concat_size() ||
      trace.probs.size() != 2 || trace.sentence.rows() != hp.sentence_length ||
      trace.sentence.cols() != hp.embedding_dim) {
    throw ShapeError("forward trace does not match the model");
  }
}

// Delta arriving at the concat vector (after undoing dropout).
Vector concat_delta(const OpcnnModel& model, const ForwardTrace& trace, int label, Vector* logit_delta) {
  Vector dz(2);
  for (std::size_t c = 0; c < 2; ++c) dz[c] = trace.probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
  Vector dh(trace.hidden.size(), 0.0);
  for (std::size_t c = 0; c < 2; ++c) axpy(dz[c], model.out_weight.row(c), dh);
  if (!trace.dropout_mask.empty()) {
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= trace.dropout_mask[i];
  }
  if (logit_delta) *logit_delta = std::move(dz);
  return dh;
}

// Delta on pooled slot s of filter fi; accumulates the pooling affine grads.
double pooled_slot_delta(const OpcnnModel& model, const FilterTrace& ft, std::size_t fi, std::size_t s,
                         double d_out, Gradients* grads) {
  if (!model.hyper.pooling_affine) return d_out;
  double d_pre = d_out;
  if (model.hyper.pool_activation == PoolActivation::relu && !(ft.affine_pre[s] > 0.0)) d_pre = 0.0;
  if (grads) {
    grads->pool_scale[fi] += d_pre * ft.pooled.values[s];
    grads->pool_bias[fi] += d_pre;
  }
  return d_pre * model.pool_scale[fi];
}

}  // namespace

std::vector<Vector> feature_map_deltas(const OpcnnModel& model, const ForwardTrace& trace, int label) {
  check_trace(model, trace);
  const Vector dconcat = concat_delta(model, trace, label, nullptr);
  const std::size_t k = model.hyper.k;
  std::vector<Vector> out(trace.filters.size());
  for (std::size_t fi = 0; fi < trace.filters.size(); ++fi) {
    const FilterTrace& ft = trace.filters[fi];
    out[fi].assign(ft.act.size(), 0.0);
    for (std::size_t s = 0; s < k; ++s) {
      const auto idx = ft.pooled.indices[s];
      if (idx == PooledSelection::kPadSlot) continue;
      out[fi][static_cast<std::size_t>(idx)] += pooled_slot_delta(model, ft, fi, s, dconcat[fi * k + s], nullptr);
    }
  }
  return out;
}

void backward_into(const OpcnnModel& model, const ForwardTrace& trace, int label, Gradients& grads) {
  check_trace(model, trace);
  if (label != 0 && label != 1) throw std::out_of_range("label must be 0 or 1");
  const Hyperparams& hp = model.hyper;
  const std::size_t k = hp.k;
  const std::size_t m = hp.embedding_dim;

  Vector dz;
  const Vector dconcat = concat_delta(model, trace, label, &dz);
  for (std::size_t c = 0; c < 2; ++c) {
    axpy(dz[c], trace.hidden, grads.out_weight.row(c));
    grads.out_bias[c] += dz[c];
  }

  Matrix dsentence;
  std::vector<char> touched;
  if (hp.trainable_embeddings) {
    dsentence = Matrix(trace.sentence.rows(), m);
    touched.assign(trace.sentence.rows(), 0);
  }

  std::size_t fi = 0;
  for (std::size_t g = 0; g < model.conv.size(); ++g) {
    const ConvGroup& group = model.conv[g];
    const std::size_t h = group.width;
    for (std::size_t f = 0; f < hp.filters_per_width; ++f, ++fi) {
      const FilterTrace& ft = trace.filters[fi];
      for (std::size_t s = 0; s < k; ++s) {
        const double d_pooled = pooled_slot_delta(model, ft, fi, s, dconcat[fi * k + s], &grads);
        const auto idx = ft.pooled.indices[s];
        if (idx == PooledSelection::kPadSlot) continue;
        const auto j = static_cast<std::size_t>(idx);
        // ReLU gate; the subgradient at exactly zero is taken as zero.
        if (!(ft.pre[j] > 0.0) || d_pooled == 0.0) continue;
        axpy(d_pooled, trace.sentence.rows_span(j, h), grads.kernels[g].row(f));
        grads.conv_bias[g][f] += d_pooled;
        if (hp.trainable_embeddings) {
          const auto kernel = group.kernels.row(f);
          for (std::size_t t = 0; t < h; ++t) {
            axpy(d_pooled, kernel.subspan(t * m, m), dsentence.row(j + t));
            touched[j + t] = 1;
          }
        }
      }
    }
  }

  if (hp.trainable_embeddings) {
    for (std::size_t t = 0; t < trace.ids.size(); ++t) {
      const std::int32_t id = trace.ids[t];
      if (id == 0 || !touched[t]) continue;
      auto row = dsentence.row(t);
      auto [it, inserted] = grads.embedding_rows.try_emplace(id, Vector(row.begin(), row.end()));
      if (!inserted) axpy(1.0, row, it->second);
    }
  }
}

Gradients backward(const OpcnnModel& model, const ForwardTrace& trace, int label) {
  Gradients grads = Gradients::zeros_like(model);
  backward_into(model, trace, label, grads);
  return grads;
}

Hyperparams tiny_hyperparams() {
  Hyperparams h;
  h.embedding_dim = 4;
  h.filter_widths = {2, 3};
  h.filters_per_width = 2;
  h.k = 2;
  h.sentence_length = 7;
  h.dropout_p = 0.0;
  h.pooling_affine = true;
  return h;
}

}  // namespace opcnn

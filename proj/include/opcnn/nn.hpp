#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "opcnn/rng.hpp"
#include "opcnn/tensor.hpp"

namespace opcnn {

enum class PoolActivation { relu, identity };

PoolActivation parse_pool_activation(std::string_view name);
std::string_view to_string(PoolActivation a);

/// Network shape. Defaults are the published settings: 100-d word vectors,
/// widths 3/4/5 with 64 filters each, k = 3, dropout 0.5.
struct Hyperparams {
  std::size_t embedding_dim = 100;
  std::vector<std::size_t> filter_widths{3, 4, 5};
  std::size_t filters_per_width = 64;
  std::size_t k = 3;
  double dropout_p = 0.5;
  /// Sentence length n. Every input id sequence must have exactly this length.
  std::size_t sentence_length = 0;
  /// Scale/bias/activation around the pooled values. When off the pooled
  /// values feed the output layer directly.
  bool pooling_affine = true;
  PoolActivation pool_activation = PoolActivation::relu;
  bool trainable_embeddings = true;

  /// Same network with single max pooling and no pooling affine: the plain
  /// CNN baseline.
  Hyperparams as_max_pool_cnn() const;

  std::size_t feature_maps() const { return filter_widths.size() * filters_per_width; }
  std::size_t concat_size() const { return feature_maps() * k; }
  std::size_t max_width() const;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  bool operator==(const Hyperparams&) const = default;
};

/// All filters of one width. Row f of `kernels` is filter f flattened
/// row-major (width x embedding_dim).
struct ConvGroup {
  std::size_t width = 0;
  Matrix kernels;
  Vector bias;

  bool operator==(const ConvGroup&) const = default;
};

struct OpcnnModel {
  Hyperparams hyper;
  /// V x m; row 0 is the padding row and stays zero.
  Matrix embedding;
  /// Ascending width order.
  std::vector<ConvGroup> conv;
  /// Per feature map, in concat order.
  Vector pool_scale;
  Vector pool_bias;
  /// 2 x concat_size
  Matrix out_weight;
  Vector out_bias;

  /// Xavier-initialised model. Embedding rows use the per-row Xavier bound
  /// sqrt(6 / (1 + m)); conv kernels use (width, m) and the output layer
  /// (2, concat_size). Pooling scale starts at 1, all biases at 0.
  static OpcnnModel init(const Hyperparams& hyper, std::size_t vocab_size, std::uint64_t seed);
  /// Every parameter zero (pooling scale included).
  static OpcnnModel zeros(const Hyperparams& hyper, std::size_t vocab_size);

  std::size_t vocab_size() const { return embedding.rows(); }
  bool operator==(const OpcnnModel&) const = default;
};

/// Result of order-preserving k-max pooling. `indices` holds source
/// positions in increasing order; slots past the end of a short input carry
/// kPadSlot and value 0.
struct PooledSelection {
  static constexpr std::ptrdiff_t kPadSlot = -1;
  Vector values;
  std::vector<std::ptrdiff_t> indices;
};

struct FilterTrace {
  Vector pre;       ///< conv pre-activation, one per window
  Vector act;       ///< ReLU(pre), the feature map
  PooledSelection pooled;
  Vector affine_pre;  ///< scale * pooled + bias (empty when affine is off)
  Vector out;         ///< values placed in the concat vector
};

struct ForwardTrace {
  std::vector<std::int32_t> ids;
  Matrix sentence;
  std::vector<FilterTrace> filters;  ///< concat order
  Vector dropout_mask;               ///< empty at inference
  Vector concat;
  Vector hidden;  ///< concat after dropout
  Vector logits;
  Vector probs;
};

/// Mirrors OpcnnModel. Embedding gradients are stored only for rows that
/// received signal; row 0 (padding) never appears.
struct Gradients {
  std::vector<Matrix> kernels;
  std::vector<Vector> conv_bias;
  Vector pool_scale;
  Vector pool_bias;
  Matrix out_weight;
  Vector out_bias;
  std::map<std::int32_t, Vector> embedding_rows;

  static Gradients zeros_like(const OpcnnModel& model);

  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
  bool all_finite() const;
  bool operator==(const Gradients&) const = default;
};

Matrix embed_lookup(std::span<const std::int32_t> ids, const Matrix& embedding);

/// ReLU(valid convolution + bias): element j is the window starting at row j.
Vector conv_valid(const Matrix& sentence, const Matrix& kernel, double bias);

/// Keeps the k largest values (ties to the lower index) in their original
/// order. Shorter inputs are kept whole and zero-padded to k.
PooledSelection kmax_order_pool(std::span<const double> s, std::size_t k);

/// activation(scale * v + bias), elementwise.
Vector pool_affine(std::span<const double> values, double scale, double bias, PoolActivation activation);

Vector softmax(std::span<const double> logits);

/// Inverted-dropout mask: each entry is 0 with probability p, else 1/(1-p).
Vector make_dropout_mask(std::size_t size, double p, Rng& rng);

/// Forward pass. Pass a dropout mask only in training mode.
std::pair<Vector, ForwardTrace> forward(const OpcnnModel& model, std::span<const std::int32_t> ids,
                                        std::optional<std::span<const double>> dropout_mask = std::nullopt);

/// In-place variant that reuses the buffers in `trace`.
void forward_into(const OpcnnModel& model, std::span<const std::int32_t> ids,
                  std::optional<std::span<const double>> dropout_mask, ForwardTrace& trace);

/// -ln(p[label]) with p clamped to >= 1e-12.
double cross_entropy(std::span<const double> probs, int label);

/// Hand-derived backward pass for softmax cross-entropy. `trace` must come
/// from forward() on the same model.
Gradients backward(const OpcnnModel& model, const ForwardTrace& trace, int label);

/// Accumulates into `grads` instead of allocating.
void backward_into(const OpcnnModel& model, const ForwardTrace& trace, int label, Gradients& grads);

/// Feature-map delta (after pooling routing and before the ReLU gate) for each
/// filter. Exposed for tests of the routing rule.
std::vector<Vector> feature_map_deltas(const OpcnnModel& model, const ForwardTrace& trace, int label);

// --- gradient checking -----------------------------------------------------

struct GradCheckGroup {
  std::string name;
  std::size_t parameters = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double tolerance = 0.0;
  bool passed() const;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Minimum distance kept between any ReLU pre-activation and zero, and
  /// between the k-th and (k+1)-th feature-map values, before differencing.
  double kink_guard = 1e-3;
  /// Test hook: multiply the analytic gradient of the first kernel group by
  /// this factor before comparing.
  double kernel_fault_scale = 1.0;
};

/// Compares backward() against central differences for every parameter,
/// grouped as K[w=..] per width, conv_bias, pool_scale, pool_bias,
/// out_weight, out_bias and embedding (trainable embeddings only, pad row
/// excluded). Dropout is off; biases are nudged so that no pre-activation
/// sits on a ReLU kink and no top-k selection is a near tie.
GradCheckReport grad_check(const OpcnnModel& model, std::span<const std::int32_t> ids, int label,
                           const GradCheckOptions& options = {});

/// The documented tiny configuration: n=7, m=4, widths {2,3}, H=2, k=2,
/// pooling affine on.
Hyperparams tiny_hyperparams();

}  // namespace opcnn

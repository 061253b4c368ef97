#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace opcnn {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TokenizerMode { whitespace, character };

TokenizerMode parse_tokenizer_mode(std::string_view name);
std::string_view to_string(TokenizerMode mode);

/// Whitespace mode splits on runs of Unicode whitespace. Character mode emits
/// one token per non-whitespace code point, which suits unsegmented Chinese.
/// Input is treated as UTF-8; invalid bytes are passed through one at a time.
std::vector<std::string> tokenize(std::string_view text, TokenizerMode mode);

inline constexpr int kTruthful = 0;
inline constexpr int kDeceptive = 1;

struct Document {
  std::string text;
  int label = kTruthful;
  /// Cross-validation fold from the source layout (1..5 for the Ott corpus),
  /// 0 when the source has none.
  int fold = 0;

  bool operator==(const Document&) const = default;
};

enum class Provenance { jsonl, ott, synthetic };

std::string_view to_string(Provenance p);

struct Dataset {
  std::vector<Document> documents;
  Provenance provenance = Provenance::jsonl;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
  bool operator==(const Dataset&) const = default;
};

/// Token to id map. Id 0 is padding, id 1 the unknown token; real tokens get
/// dense ids from 2.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();

  /// Rebuilds a vocabulary from its id-ordered token list (reserved tokens
  /// included), as stored in checkpoints.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

  std::int32_t add(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

/// Ids are assigned by descending corpus frequency, ties broken by first
/// occurrence. Tokens seen fewer than `min_count` times are left out.
Vocab build_vocab(std::span<const Dataset> datasets, TokenizerMode mode, std::size_t min_count);

/// Fixed-length id sequence: truncated at the tail, right-padded with kPad.
std::vector<std::int32_t> encode(std::span<const std::string> tokens, const Vocab& vocab, std::size_t n);

Dataset load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const Dataset& data);

/// Loads the op_spam layout
///   <root>/<polarity>_polarity/<class>_from_<source>/fold<N>/*.txt
/// collapsing polarity into a binary truthful(0)/deceptive(1) label.
Dataset load_ott(const std::filesystem::path& root);

using Folds = std::vector<std::vector<std::size_t>>;

/// Shuffles [0, size) with `seed` and cuts it into k folds whose sizes differ
/// by at most one; the first size % k folds hold the extra element.
Folds kfold_indices(std::size_t size, std::size_t k, std::uint64_t seed);
Folds kfold_split(const Dataset& data, std::size_t k, std::uint64_t seed);

/// Folds taken from Document::fold (1..max), for sources that ship their own.
Folds folds_from_layout(const Dataset& data);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// Sorted indices of a class-balanced subsample: every minority-class index
/// plus an equal-sized random draw from the majority class.
std::vector<std::size_t> balanced_indices(std::span<const int> labels, std::uint64_t seed);

/// Downsamples the majority class so both labels have the same count. Order
/// of the surviving documents is preserved.
Dataset balanced_downsample(const Dataset& data, std::uint64_t seed);

/// Nearest-rank percentile of tokenized document lengths, at least 1.
std::size_t length_percentile(const Dataset& data, TokenizerMode mode, double q);

inline constexpr std::string_view kMarkerA = "MA";
inline constexpr std::string_view kMarkerB = "MB";

/// Synthetic word-order task. Each document is
///   prefix MA|MB gap MB|MA suffix
/// with filler tokens f0..f{V-1}. Prefix, gap and suffix lengths are drawn
/// uniformly from [min_gap, 2 * min_gap], so with min_gap at least the widest
/// filter no convolution window sees both markers, and none sees a marker
/// next to a sentence edge. Label is 1 iff MA precedes MB. Labels are
/// balanced to within one.
Dataset gen_order_task(std::size_t n_samples, std::size_t filler_vocab_size, std::size_t min_gap,
                       std::uint64_t seed);

}  // namespace opcnn

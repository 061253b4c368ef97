#pragma once

#include <filesystem>
#include <stdexcept>

#include "opcnn/corpus.hpp"
#include "opcnn/nn.hpp"

namespace opcnn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  OpcnnModel model;
  Vocab vocab;
  TokenizerMode tokenizer = TokenizerMode::whitespace;
};

/// Writes key-ordered JSON: format_version, hyperparams, tokenizer, vocab
/// (id order) and every tensor as {"shape": [...], "data": [...]}. Doubles are
/// printed with round-trip precision.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Reads word2vec text vectors ("V m" header, then "token v1 ... vm" per
/// line) into the rows of `embedding` whose token is in `vocab`. Returns the
/// number of rows filled. The header dimension must equal embedding.cols().
std::size_t load_word2vec_text(const std::filesystem::path& path, const Vocab& vocab, Matrix& embedding);

}  // namespace opcnn

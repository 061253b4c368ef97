#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "opcnn/baselines.hpp"
#include "opcnn/nn.hpp"
#include "opcnn/train.hpp"

namespace opcnn::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericError = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a command reads. Defaults are the published settings; see
/// `opcnn config` or README for the documented key list.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "opcnn_run";

  // data
  std::string corpus = "synthetic";  ///< synthetic | jsonl | ott
  std::string train_path;
  std::string test_path;
  std::string eval_path;
  std::string input_path;
  double test_fraction = 0.2;
  std::size_t synth_train = 3000;
  std::size_t synth_test = 1000;
  std::size_t synth_min_gap = 6;
  std::size_t synth_filler_vocab = 50;
  std::string tokenizer = "auto";  ///< auto | whitespace | char
  std::size_t min_count = 1;
  std::string embedding_file;
  std::string trainable_embeddings = "auto";  ///< auto | true | false
  std::string checkpoint;

  Hyperparams hyper;
  TrainConfig train;

  double svm_lambda = 1e-4;
  std::size_t svm_epochs = 50;
  std::string bigram_weighting = "counts";

  std::size_t folds = 3;
  std::vector<std::size_t> ksweep_values{1, 2, 3, 4, 5};
  bool bench_sweep = false;
  std::vector<std::size_t> bench_sweep_sizes{250, 500, 1000, 2000, 3000};

  double gradcheck_epsilon = 1e-5;
  double gradcheck_tolerance = 1e-4;
};

struct ConfigKey {
  std::string name;
  std::string doc;
};

/// Every accepted key, in manifest order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key. Throws ConfigError naming the key on unknown keys or
/// unparsable values.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

/// Flat `key = value` lines; `#` starts a comment; blank lines ignored.
/// Later assignments win.
void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view origin);
void apply_config_file(RunConfig& cfg, const std::string& path);

/// Every key with its current value, loadable by apply_config_text.
std::string render_config(const RunConfig& cfg);

/// Runs one command line (argv[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace opcnn::cli

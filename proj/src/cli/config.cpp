#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "opcnn/cli.hpp"

namespace opcnn::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "': expected " +
                    std::string(expected));
}

template <class T>
T parse_number(std::string_view key, std::string_view v, std::string_view expected) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, expected);
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  return parse_number<std::uint64_t>(key, v, "a non-negative integer");
}
std::size_t parse_size(std::string_view key, std::string_view v) {
  return parse_number<std::size_t>(key, v, "a non-negative integer");
}
double parse_double(std::string_view key, std::string_view v) { return parse_number<double>(key, v, "a number"); }

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(parse_number<std::size_t>(key, item, "a comma-separated list of integers"));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string choice(std::string_view key, std::string_view v, std::initializer_list<std::string_view> allowed) {
  for (auto a : allowed)
    if (v == a) return std::string(v);
  std::string expected;
  for (auto a : allowed) expected += (expected.empty() ? "" : " | ") + std::string(a);
  bad_value(key, v, expected);
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::vector<std::size_t>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

struct Field {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define OPCNN_STRING(name, member, doc)                                                        \
  Field {                                                                                      \
    {name, doc}, [](RunConfig& c, std::string_view v) { c.member = std::string(v); },        \
        [](const RunConfig& c) { return c.member; }                                            \
  }
#define OPCNN_TYPED(name, member, parser, doc)                                                 \
  Field {                                                                                      \
    {name, doc}, [](RunConfig& c, std::string_view v) { c.member = parser(name, v); },       \
        [](const RunConfig& c) { return fmt(c.member); }                                       \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      OPCNN_TYPED("seed", seed, parse_u64, "root seed; every random stream is derived from it"),
      OPCNN_STRING("out_dir", out_dir, "directory for all outputs"),
      Field{{"corpus", "synthetic | jsonl | ott"},
            [](RunConfig& c, std::string_view v) { c.corpus = choice("corpus", v, {"synthetic", "jsonl", "ott"}); },
            [](const RunConfig& c) { return c.corpus; }},
      OPCNN_STRING("train_path", train_path, "jsonl training file or op_spam root directory"),
      OPCNN_STRING("test_path", test_path, "jsonl test file; empty splits test_fraction off the training data"),
      OPCNN_STRING("eval_path", eval_path, "corpus scored by eval; empty uses the test split"),
      OPCNN_STRING("input_path", input_path, "text lines for predict; empty reads stdin"),
      OPCNN_TYPED("test_fraction", test_fraction, parse_double, "held-out share when test_path is empty"),
      OPCNN_TYPED("synth_train", synth_train, parse_size, "synthetic training documents"),
      OPCNN_TYPED("synth_test", synth_test, parse_size, "synthetic test documents"),
      OPCNN_TYPED("synth_min_gap", synth_min_gap, parse_size, "minimum filler run around and between the markers"),
      OPCNN_TYPED("synth_filler_vocab", synth_filler_vocab, parse_size, "number of distinct filler tokens"),
      Field{{"tokenizer", "auto | whitespace | char; auto picks char when most documents contain no whitespace"},
            [](RunConfig& c, std::string_view v) {
              c.tokenizer = choice("tokenizer", v, {"auto", "whitespace", "char"});
            },
            [](const RunConfig& c) { return c.tokenizer; }},
      OPCNN_TYPED("min_count", min_count, parse_size, "drop tokens seen fewer times from the vocabulary"),
      OPCNN_STRING("embedding_file", embedding_file, "word2vec text vectors; empty means random init"),
      Field{{"trainable_embeddings", "auto | true | false; auto trains random vectors and freezes loaded ones"},
            [](RunConfig& c, std::string_view v) {
              c.trainable_embeddings = choice("trainable_embeddings", v, {"auto", "true", "false"});
            },
            [](const RunConfig& c) { return c.trainable_embeddings; }},
      OPCNN_STRING("checkpoint", checkpoint, "checkpoint read by eval and predict"),
      OPCNN_TYPED("embedding_dim", hyper.embedding_dim, parse_size, "word vector dimension m"),
      OPCNN_TYPED("filter_widths", hyper.filter_widths, parse_list, "convolution widths, ascending"),
      OPCNN_TYPED("filters_per_width", hyper.filters_per_width, parse_size, "filters per width"),
      OPCNN_TYPED("k", hyper.k, parse_size, "values kept by order-preserving pooling"),
      OPCNN_TYPED("dropout", hyper.dropout_p, parse_double, "dropout probability on the concat vector"),
      OPCNN_TYPED("sentence_length", hyper.sentence_length, parse_size,
                  "sentence length n; 0 uses the 95th percentile of training lengths"),
      OPCNN_TYPED("pooling_affine", hyper.pooling_affine, parse_bool, "scale, bias and activation after pooling"),
      Field{{"pool_activation", "relu | identity"},
            [](RunConfig& c, std::string_view v) {
              try {
                c.hyper.pool_activation = parse_pool_activation(v);
              } catch (const std::exception&) {
                bad_value("pool_activation", v, "relu | identity");
              }
            },
            [](const RunConfig& c) { return std::string(to_string(c.hyper.pool_activation)); }},
      OPCNN_TYPED("learning_rate", train.learning_rate, parse_double, "SGD step size"),
      OPCNN_TYPED("epochs", train.epochs, parse_size, "training epochs"),
      OPCNN_TYPED("minibatch", train.minibatch, parse_size, "samples per SGD step"),
      OPCNN_TYPED("l2_lambda", train.l2_lambda, parse_double, "weight decay coefficient"),
      OPCNN_TYPED("shuffle", train.shuffle, parse_bool, "reshuffle the training set every epoch"),
      OPCNN_TYPED("balance", train.balance, parse_bool, "downsample the majority class before training"),
      OPCNN_TYPED("patience", train.patience, parse_size, "stop after this many epochs without validation gain"),
      OPCNN_TYPED("restore_best", train.restore_best, parse_bool, "keep the epoch with the best validation accuracy"),
      OPCNN_TYPED("validation_fraction", train.validation_fraction, parse_double,
                  "share of the training data held out for patience and restore_best"),
      OPCNN_TYPED("svm_lambda", svm_lambda, parse_double, "SVM regularisation"),
      OPCNN_TYPED("svm_epochs", svm_epochs, parse_size, "SVM passes over the training set"),
      Field{{"bigram_weighting", "counts | presence"},
            [](RunConfig& c, std::string_view v) {
              c.bigram_weighting = choice("bigram_weighting", v, {"counts", "presence"});
            },
            [](const RunConfig& c) { return c.bigram_weighting; }},
      OPCNN_TYPED("folds", folds, parse_size, "cross-validation folds for ksweep"),
      OPCNN_TYPED("ksweep_values", ksweep_values, parse_list, "pooling sizes compared by ksweep"),
      OPCNN_TYPED("bench_sweep", bench_sweep, parse_bool, "bench also reruns every method per training size"),
      OPCNN_TYPED("bench_sweep_sizes", bench_sweep_sizes, parse_list, "training sizes for the bench sweep"),
      OPCNN_TYPED("gradcheck_epsilon", gradcheck_epsilon, parse_double, "finite-difference step"),
      OPCNN_TYPED("gradcheck_tolerance", gradcheck_tolerance, parse_double, "maximum relative error"),
  };
  return table;
}

#undef OPCNN_STRING
#undef OPCNN_TYPED

const Field& find_field(std::string_view key) {
  for (const auto& f : fields())
    if (f.key.name == key) return f;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  find_field(key).set(cfg, trim(value));
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) { return find_field(key).get(cfg); }

void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path);
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key.name + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace opcnn::cli

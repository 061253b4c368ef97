#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "opcnn/checkpoint.hpp"
#include "opcnn/cli.hpp"
#include "opcnn/corpus.hpp"
#include "opcnn/metrics.hpp"
#include "opcnn/rng.hpp"

namespace opcnn::cli {

namespace fs = std::filesystem;

namespace {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read '" + p.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// FNV-1a over the file, or over every file below a directory (relative path
/// and bytes, in sorted path order).
std::string checksum(const fs::path& p) {
  std::error_code ec;
  if (fs::is_directory(p, ec)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) {
      acc += fs::relative(f, p).generic_string();
      acc += '\0';
      acc += hex64(fnv1a64(read_bytes(f)));
      acc += '\n';
    }
    return hex64(fnv1a64(acc));
  }
  return hex64(fnv1a64(read_bytes(p)));
}

/// Collects what a manifest records beyond the config itself.
struct Run {
  std::string command;
  RunConfig cfg;
  std::vector<std::pair<std::string, std::string>> notes;  // seeds, resolved values, checksums

  void note(const std::string& key, const std::string& value) {
    for (const auto& n : notes)
      if (n.first == key) return;
    notes.emplace_back(key, value);
  }
  void note_seed(const std::string& label) { note("seed." + label, std::to_string(derive_seed(cfg.seed, label))); }
  void note_input(const std::string& key, const std::string& path) {
    if (!path.empty()) note("fnv1a64." + key, checksum(path));
  }

  fs::path out(const std::string& name) const { return fs::path(cfg.out_dir) / name; }

  void write_manifest() const {
    std::ofstream m(out("manifest.txt"));
    m << "# opcnn " << command << "\n"
      << "# rerun: opcnn " << command << " --config manifest.txt\n";
    m << render_config(cfg);
    for (const auto& [k, v] : notes) m << "# " << k << " = " << v << "\n";
  }
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  return f;
}

TokenizerMode resolve_tokenizer(const std::string& setting, const Dataset& train) {
  if (setting == "whitespace") return TokenizerMode::whitespace;
  if (setting == "char") return TokenizerMode::character;
  std::size_t unspaced = 0, nonempty = 0;
  for (const auto& d : train.documents) {
    const auto toks = tokenize(d.text, TokenizerMode::whitespace);
    if (toks.empty()) continue;
    ++nonempty;
    unspaced += toks.size() == 1;
  }
  return nonempty > 0 && 2 * unspaced > nonempty ? TokenizerMode::character : TokenizerMode::whitespace;
}

struct Split {
  Dataset train, test;
};

Dataset load_corpus(const RunConfig& cfg, const std::string& path) {
  if (path.empty()) throw ConfigError("corpus '" + cfg.corpus + "' needs a path");
  if (!fs::exists(path)) throw DataError("corpus path '" + path + "' does not exist");
  return cfg.corpus == "ott" ? load_ott(path) : load_jsonl(path);
}

Split load_split(Run& run) {
  const RunConfig& cfg = run.cfg;
  Split s;
  if (cfg.corpus == "synthetic") {
    run.note_seed("synth_train");
    run.note_seed("synth_test");
    s.train = gen_order_task(cfg.synth_train, cfg.synth_filler_vocab, cfg.synth_min_gap,
                             derive_seed(cfg.seed, "synth_train"));
    s.test = gen_order_task(cfg.synth_test, cfg.synth_filler_vocab, cfg.synth_min_gap,
                            derive_seed(cfg.seed, "synth_test"));
  } else {
    Dataset all = load_corpus(cfg, cfg.train_path);
    run.note_input("train_path", cfg.train_path);
    if (!cfg.test_path.empty()) {
      s.train = std::move(all);
      s.test = load_corpus(cfg, cfg.test_path);
      run.note_input("test_path", cfg.test_path);
    } else {
      if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw ConfigError("test_fraction must be in (0, 1) when test_path is empty");
      run.note_seed("split");
      const auto h = holdout_split(all.size(), cfg.test_fraction, derive_seed(cfg.seed, "split"));
      s.train = subset(all, h.train);
      s.test = subset(all, h.valid);
    }
  }
  if (s.train.empty()) throw DataError("training corpus is empty");
  return s;
}

/// Vocabulary, tokenizer and shape decisions made from the training split.
struct Prepared {
  TokenizerMode mode = TokenizerMode::whitespace;
  Vocab vocab;
  Hyperparams hyper;
};

Prepared prepare(Run& run, const Dataset& train) {
  const RunConfig& cfg = run.cfg;
  Prepared p;
  p.mode = resolve_tokenizer(cfg.tokenizer, train);
  p.vocab = build_vocab(std::span(&train, 1), p.mode, std::max<std::size_t>(cfg.min_count, 1));
  p.hyper = cfg.hyper;
  if (p.hyper.sentence_length == 0) {
    p.hyper.sentence_length = std::max(length_percentile(train, p.mode, 0.95), p.hyper.max_width());
  }
  if (cfg.trainable_embeddings == "auto") p.hyper.trainable_embeddings = cfg.embedding_file.empty();
  else p.hyper.trainable_embeddings = cfg.trainable_embeddings == "true";
  p.hyper.validate();
  run.note("resolved.tokenizer", std::string(to_string(p.mode)));
  run.note("resolved.sentence_length", std::to_string(p.hyper.sentence_length));
  run.note("resolved.vocab_size", std::to_string(p.vocab.size()));
  return p;
}

OpcnnModel init_model(Run& run, const Prepared& p, const Hyperparams& hyper) {
  run.note_seed("init");
  OpcnnModel model = OpcnnModel::init(hyper, p.vocab.size(), derive_seed(run.cfg.seed, "init"));
  if (!run.cfg.embedding_file.empty()) {
    if (!fs::exists(run.cfg.embedding_file))
      throw DataError("embedding file '" + run.cfg.embedding_file + "' does not exist");
    const auto filled = load_word2vec_text(run.cfg.embedding_file, p.vocab, model.embedding);
    run.note_input("embedding_file", run.cfg.embedding_file);
    run.note("resolved.pretrained_rows", std::to_string(filled));
  }
  return model;
}

TrainConfig train_config(Run& run) {
  TrainConfig tc = run.cfg.train;
  run.note_seed("train");
  tc.seed = derive_seed(run.cfg.seed, "train");
  tc.validate();
  if ((tc.restore_best || tc.patience > 0) && !(tc.validation_fraction > 0.0))
    throw ConfigError("patience and restore_best need validation_fraction > 0");
  return tc;
}

/// Trains on `train`, holding out validation_fraction of it when set;
/// otherwise `monitor` is scored each epoch for the history only.
TrainHistory fit(Run& run, OpcnnModel& model, const EncodedSet& train_set, const EncodedSet& monitor,
                 const TrainConfig& tc) {
  if (tc.validation_fraction > 0.0) {
    run.note_seed("holdout");
    const auto h = holdout_split(train_set.size(), tc.validation_fraction, derive_seed(run.cfg.seed, "holdout"));
    return train(model, train_set.subset(h.train), train_set.subset(h.valid), tc);
  }
  return train(model, train_set, monitor, tc);
}

ConfusionCounts to_counts(const std::vector<int>& pred, const std::vector<int>& gold) { return confusion(pred, gold); }

// --- commands --------------------------------------------------------------

int cmd_train(Run& run, std::ostream& out) {
  const Split split = load_split(run);
  const Prepared p = prepare(run, split.train);
  const TrainConfig tc = train_config(run);
  OpcnnModel model = init_model(run, p, p.hyper);
  const EncodedSet tr = encode_dataset(split.train, p.vocab, p.mode, p.hyper.sentence_length);
  const EncodedSet te = encode_dataset(split.test, p.vocab, p.mode, p.hyper.sentence_length);
  const TrainHistory history = fit(run, model, tr, te, tc);

  save_checkpoint(run.out("checkpoint.json"), Checkpoint{model, p.vocab, p.mode});
  {
    auto f = open_out(run.out("history.csv"));
    write_history_csv(f, history);
  }
  if (!te.empty()) {
    auto f = open_out(run.out("metrics.csv"));
    write_metrics_header(f);
    write_metrics_row(f, {"opcnn", evaluate(model, te)});
  }
  run.write_manifest();
  out << "trained " << history.epochs.size() << " epochs";
  if (!te.empty()) out << ", test accuracy " << accuracy(evaluate(model, te)).value;
  out << "\n";
  return kOk;
}

Checkpoint load_ckpt(Run& run) {
  if (run.cfg.checkpoint.empty()) throw ConfigError("no checkpoint given (--checkpoint or checkpoint = ...)");
  if (!fs::exists(run.cfg.checkpoint)) throw DataError("checkpoint '" + run.cfg.checkpoint + "' does not exist");
  run.note_input("checkpoint", run.cfg.checkpoint);
  try {
    return load_checkpoint(run.cfg.checkpoint);
  } catch (const CheckpointError& e) {
    throw DataError(e.what());
  }
}

int cmd_eval(Run& run, std::ostream& out) {
  const Checkpoint ckpt = load_ckpt(run);
  const RunConfig& cfg = run.cfg;
  if (cfg.tokenizer != "auto" && parse_tokenizer_mode(cfg.tokenizer) != ckpt.tokenizer) {
    throw ConfigError("vocabulary mismatch: checkpoint was built with tokenizer '" +
                      std::string(to_string(ckpt.tokenizer)) + "', config asks for '" + cfg.tokenizer + "'");
  }
  Dataset data;
  if (!cfg.eval_path.empty()) {
    data = load_corpus(cfg, cfg.eval_path);
    run.note_input("eval_path", cfg.eval_path);
  } else {
    data = load_split(run).test;
  }
  if (data.empty()) throw DataError("evaluation corpus is empty");

  std::size_t tokens = 0, known = 0;
  for (const auto& d : data.documents) {
    for (const auto& t : tokenize(d.text, ckpt.tokenizer)) {
      ++tokens;
      known += ckpt.vocab.id(t) != Vocab::kUnk;
    }
  }
  if (tokens > 0 && known == 0) {
    throw ConfigError("vocabulary mismatch: none of the corpus tokens are in the checkpoint vocabulary");
  }

  const EncodedSet set = encode_dataset(data, ckpt.vocab, ckpt.tokenizer, ckpt.model.hyper.sentence_length);
  std::ostringstream csv;
  write_metrics_header(csv);
  write_metrics_row(csv, {"opcnn", evaluate(ckpt.model, set)});
  open_out(run.out("metrics.csv")) << csv.str();
  run.write_manifest();
  out << csv.str();
  return kOk;
}

int cmd_predict(Run& run, std::istream& in, std::ostream& out) {
  const Checkpoint ckpt = load_ckpt(run);
  std::ifstream file;
  std::istream* src = &in;
  if (!run.cfg.input_path.empty()) {
    file.open(run.cfg.input_path, std::ios::binary);
    if (!file) throw DataError("cannot read '" + run.cfg.input_path + "'");
    run.note_input("input_path", run.cfg.input_path);
    src = &file;
  }
  std::ostringstream lines;
  std::string line;
  ForwardTrace trace;
  const std::size_t n = ckpt.model.hyper.sentence_length;
  while (std::getline(*src, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto toks = tokenize(line, ckpt.tokenizer);
    const auto ids = encode(toks, ckpt.vocab, n);
    forward_into(ckpt.model, ids, std::nullopt, trace);
    const double p = trace.probs[1];
    char buf[48];
    std::snprintf(buf, sizeof buf, "%d\t%.6f", p > trace.probs[0] ? 1 : 0, p);
    lines << buf << (toks.empty() ? "\tall_pad" : "") << '\n';
  }
  open_out(run.out("predictions.tsv")) << lines.str();
  run.write_manifest();
  out << lines.str();
  return kOk;
}

int cmd_gradcheck(Run& run, std::ostream& out, bool inject_fault) {
  const Hyperparams hyper = tiny_hyperparams();
  constexpr std::size_t kVocab = 10;
  run.note_seed("gradcheck");
  const std::uint64_t seed = derive_seed(run.cfg.seed, "gradcheck");
  const OpcnnModel model = OpcnnModel::init(hyper, kVocab, seed);
  Rng rng(seed);
  std::vector<std::int32_t> ids(hyper.sentence_length);
  for (auto& id : ids) id = static_cast<std::int32_t>(1 + rng.below(kVocab - 1));
  ids.back() = Vocab::kPad;

  GradCheckOptions opt;
  opt.epsilon = run.cfg.gradcheck_epsilon;
  opt.tolerance = run.cfg.gradcheck_tolerance;
  if (inject_fault) opt.kernel_fault_scale = 1.5;

  std::vector<GradCheckGroup> merged;
  for (int label : {0, 1}) {
    const auto report = grad_check(model, ids, label, opt);
    if (merged.empty()) merged = report.groups;
    for (std::size_t g = 0; g < merged.size(); ++g) {
      merged[g].max_rel_error = std::max(merged[g].max_rel_error, report.groups[g].max_rel_error);
      merged[g].passed = merged[g].passed && report.groups[g].passed;
    }
  }
  std::ostringstream csv;
  csv << "group,parameters,max_rel_error,status\n";
  bool ok = true;
  for (const auto& g : merged) {
    char err[32];
    std::snprintf(err, sizeof err, "%.3e", g.max_rel_error);
    csv << g.name << ',' << g.parameters << ',' << err << ',' << (g.passed ? "ok" : "FAIL") << '\n';
    ok = ok && g.passed;
  }
  open_out(run.out("gradcheck.csv")) << csv.str();
  run.write_manifest();
  out << csv.str();
  return ok ? kOk : kNumericError;
}

const std::vector<std::string> kBenchMethods{"tfidf_svm", "bigram_svm", "cnn", "opcnn"};

/// Trains and scores all four methods on one split.
std::vector<MethodReport> bench_once(Run& run, const Dataset& train_docs, const Dataset& test_docs) {
  const RunConfig& cfg = run.cfg;
  const Prepared p = prepare(run, train_docs);
  std::vector<std::vector<std::string>> train_tok, test_tok;
  for (const auto& d : train_docs.documents) train_tok.push_back(tokenize(d.text, p.mode));
  for (const auto& d : test_docs.documents) test_tok.push_back(tokenize(d.text, p.mode));
  std::vector<int> train_pm;
  std::vector<int> gold;
  for (const auto& d : train_docs.documents) train_pm.push_back(d.label == kDeceptive ? 1 : -1);
  for (const auto& d : test_docs.documents) gold.push_back(d.label);

  SvmOptions svm;
  svm.lambda = cfg.svm_lambda;
  svm.epochs = cfg.svm_epochs;
  run.note_seed("svm");
  svm.seed = derive_seed(cfg.seed, "svm");
  auto svm_counts = [&](const std::vector<SparseVector>& xtr, const std::vector<SparseVector>& xte, std::size_t dim) {
    const LinearModel m = svm_train(xtr, train_pm, dim, svm);
    std::vector<int> pred;
    for (const auto& x : xte) pred.push_back(svm_predict(m, x).label == 1 ? 1 : 0);
    return to_counts(pred, gold);
  };

  std::vector<MethodReport> rows;
  const TfidfTable table = fit_tfidf(train_tok);
  rows.push_back({"tfidf_svm", svm_counts(tfidf_features(train_tok, table), tfidf_features(test_tok, table),
                                          table.vocab.size())});
  const FeatureVocab bv = fit_bigram_vocab(train_tok);
  const auto weighting = cfg.bigram_weighting == "presence" ? BigramWeighting::presence : BigramWeighting::counts;
  rows.push_back({"bigram_svm", svm_counts(bigram_features(train_tok, bv, weighting),
                                           bigram_features(test_tok, bv, weighting), bv.size())});

  const TrainConfig tc = train_config(run);
  const EncodedSet tr = encode_dataset(train_docs, p.vocab, p.mode, p.hyper.sentence_length);
  const EncodedSet te = encode_dataset(test_docs, p.vocab, p.mode, p.hyper.sentence_length);
  for (const bool order_preserving : {false, true}) {
    const Hyperparams h = order_preserving ? p.hyper : p.hyper.as_max_pool_cnn();
    OpcnnModel model = init_model(run, p, h);
    fit(run, model, tr, EncodedSet{}, tc);
    rows.push_back({order_preserving ? "opcnn" : "cnn", evaluate(model, te)});
  }
  return rows;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_bench(Run& run, std::ostream& out) {
  const Split split = load_split(run);
  if (split.test.empty()) throw DataError("test split is empty");
  const auto rows = bench_once(run, split.train, split.test);
  const double control = accuracy(rows[0].counts).value;

  std::ostringstream table;
  {
    std::ostringstream header;
    write_metrics_header(header);
    std::string h = header.str();
    h.pop_back();
    table << h << ",alpha_vs_tfidf\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::ostringstream row;
    write_metrics_row(row, rows[i]);
    std::string r = row.str();
    r.pop_back();
    table << r << ',' << (i == 0 ? "" : fmt6(accuracy_gain(accuracy(rows[i].counts).value, control))) << '\n';
  }
  std::ostringstream alpha;
  alpha << "experimental,control,alpha\n";
  for (std::size_t i = 1; i < rows.size(); ++i)
    alpha << rows[i].method << ",tfidf_svm," << fmt6(accuracy_gain(accuracy(rows[i].counts).value, control)) << '\n';
  alpha << "opcnn,cnn," << fmt6(accuracy_gain(accuracy(rows[3].counts).value, accuracy(rows[2].counts).value))
        << '\n';
  open_out(run.out("bench.csv")) << table.str();
  open_out(run.out("alpha.csv")) << alpha.str();
  out << table.str() << alpha.str();

  if (run.cfg.bench_sweep) {
    std::ostringstream sweep;
    sweep << "train_size";
    for (const auto& m : kBenchMethods) sweep << ',' << m;
    sweep << '\n';
    run.note_seed("sweep");
    for (const std::size_t size : run.cfg.bench_sweep_sizes) {
      if (size == 0 || size > split.train.size()) {
        throw ConfigError("bench_sweep_sizes entry " + std::to_string(size) + " exceeds the " +
                          std::to_string(split.train.size()) + " training documents");
      }
      std::vector<std::size_t> order(split.train.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(derive_seed(run.cfg.seed, "sweep"), std::to_string(size)));
      rng.shuffle(std::span(order));
      order.resize(size);
      std::sort(order.begin(), order.end());
      const auto sized = bench_once(run, subset(split.train, order), split.test);
      sweep << size;
      for (const auto& r : sized) sweep << ',' << fmt6(accuracy(r.counts).value);
      sweep << '\n';
    }
    open_out(run.out("bench_sweep.csv")) << sweep.str();
    out << sweep.str();
  }
  run.write_manifest();
  return kOk;
}

int cmd_ksweep(Run& run, std::ostream& out) {
  const Split split = load_split(run);
  const Prepared p = prepare(run, split.train);
  TrainConfig tc = train_config(run);
  if (run.cfg.ksweep_values.empty()) throw ConfigError("ksweep_values is empty");
  std::vector<Hyperparams> grid;
  for (const std::size_t k : run.cfg.ksweep_values) {
    Hyperparams h = p.hyper;
    h.k = k;
    h.validate();
    grid.push_back(h);
  }
  const EncodedSet data = encode_dataset(split.train, p.vocab, p.mode, p.hyper.sentence_length);
  if (run.cfg.folds < 2 || run.cfg.folds > data.size())
    throw ConfigError("folds must be between 2 and the number of training documents");
  run.note_seed("ksweep");
  const auto rows = cv_sweep(data, p.vocab.size(), grid, run.cfg.folds, derive_seed(run.cfg.seed, "ksweep"), tc);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  open_out(run.out("sweep.csv")) << csv.str();
  run.write_manifest();
  out << csv.str();
  return kOk;
}

int cmd_gen_synth(Run& run, std::ostream& out) {
  RunConfig synth = run.cfg;
  synth.corpus = "synthetic";
  Run tmp{run.command, synth, {}};
  const Split split = load_split(tmp);
  for (auto& n : tmp.notes) run.notes.push_back(n);
  write_jsonl(run.out("train.jsonl"), split.train);
  write_jsonl(run.out("test.jsonl"), split.test);
  run.write_manifest();
  out << "wrote " << split.train.size() << " training and " << split.test.size() << " test documents to "
      << run.cfg.out_dir << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Order-preserving k-max pooling CNN for deceptive opinion detection"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "list every subcommand's options");

  std::vector<std::string> config_files, overrides;
  std::string out_dir, checkpoint, data_path, input_path;
  bool inject_fault = false;
  bool list_keys = false;

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"train", "train OPCNN and write checkpoint.json, history.csv, metrics.csv"},
      {"eval", "score a checkpoint on a corpus and write metrics.csv"},
      {"predict", "print label and deceptive probability for each input line"},
      {"gradcheck", "compare analytic gradients with finite differences on the tiny model"},
      {"bench", "tf-idf+SVM, bigram+SVM, max-pool CNN and OPCNN on one split, with accuracy gains"},
      {"ksweep", "cross-validated accuracy for each pooling size k"},
      {"gen-synth", "write the synthetic word-order task as jsonl"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& s : commands) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_files, "config file(s), applied in order");
    sub->add_option("--set", overrides, "key=value override, applied after config files");
    sub->add_option("--out", out_dir, "output directory (same as out_dir)");
    sub->add_flag("--list-keys", list_keys, "print every config key with its default and exit");
    subs[s.name] = sub;
  }
  for (const char* name : {"eval", "predict"})
    subs[name]->add_option("--checkpoint", checkpoint, "checkpoint file (same as checkpoint)");
  subs["eval"]->add_option("--data", data_path, "corpus to score (same as eval_path)");
  subs["predict"]->add_option("--input", input_path, "text file, one document per line (default stdin)");
  subs["gradcheck"]->add_flag("--inject-fault", inject_fault)->group("");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  Run run;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) run.command = name;

  try {
    if (list_keys) {
      RunConfig defaults;
      for (const auto& k : config_keys())
        out << k.name << " = " << get_config_value(defaults, k.name) << "  # " << k.doc << "\n";
      return kOk;
    }
    for (const auto& f : config_files) apply_config_file(run.cfg, f);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      set_config_value(run.cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    if (!out_dir.empty()) run.cfg.out_dir = out_dir;
    if (!checkpoint.empty()) run.cfg.checkpoint = checkpoint;
    if (!data_path.empty()) run.cfg.eval_path = data_path;
    if (!input_path.empty()) run.cfg.input_path = input_path;
    if (run.cfg.corpus == "synthetic" && run.cfg.synth_train == 0) throw ConfigError("synth_train must be > 0");

    std::error_code ec;
    fs::create_directories(run.cfg.out_dir, ec);
    if (ec) throw DataError("cannot create output directory '" + run.cfg.out_dir + "': " + ec.message());

    if (run.command == "train") return cmd_train(run, out);
    if (run.command == "eval") return cmd_eval(run, out);
    if (run.command == "predict") return cmd_predict(run, in, out);
    if (run.command == "gradcheck") return cmd_gradcheck(run, out, inject_fault);
    if (run.command == "bench") return cmd_bench(run, out);
    if (run.command == "ksweep") return cmd_ksweep(run, out);
    if (run.command == "gen-synth") return cmd_gen_synth(run, out);
    err << "error: unknown command\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const CorpusError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const CheckpointError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::domain_error& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace opcnn::cli

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "opcnn/checkpoint.hpp"
#include "opcnn/cli.hpp"

using namespace opcnn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args, const std::string& stdin_text = "") {
  args.insert(args.begin(), "opcnn");
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("opcnn_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small enough for a unit test, still the real pipeline.
const std::vector<std::string> kSmall = {
    "--set", "synth_train=60",       "--set", "synth_test=20",      "--set", "synth_min_gap=3",
    "--set", "embedding_dim=6",      "--set", "filters_per_width=3", "--set", "epochs=3",
    "--set", "minibatch=10",         "--set", "l2_lambda=0",        "--set", "learning_rate=0.05"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("config text parsing") {
  cli::RunConfig cfg;
  cli::apply_config_text(cfg, "# comment\nk = 5\n\nfilter_widths = 2, 3  # trailing\nk=4\n", "inline");
  CHECK(cfg.hyper.k == 4);
  CHECK(cfg.hyper.filter_widths == std::vector<std::size_t>{2, 3});
  CHECK_THROWS_AS(cli::apply_config_text(cfg, "nope = 1\n", "inline"), cli::ConfigError);
  CHECK_THROWS_AS(cli::apply_config_text(cfg, "k = three\n", "inline"), cli::ConfigError);
  CHECK_THROWS_AS(cli::apply_config_text(cfg, "just words\n", "inline"), cli::ConfigError);
  CHECK_THROWS_AS(cli::apply_config_text(cfg, "pooling_affine = maybe\n", "inline"), cli::ConfigError);

  cfg.train.learning_rate = 0.1 + 0.2;
  cli::RunConfig back;
  cli::apply_config_text(back, cli::render_config(cfg), "rendered");
  CHECK(cli::render_config(back) == cli::render_config(cfg));
  CHECK(back.train.learning_rate == cfg.train.learning_rate);
}

TEST_CASE("defaults are the published settings") {
  const cli::RunConfig cfg;
  CHECK(cfg.hyper.embedding_dim == 100);
  CHECK(cfg.hyper.filter_widths == std::vector<std::size_t>{3, 4, 5});
  CHECK(cfg.hyper.filters_per_width == 64);
  CHECK(cfg.hyper.dropout_p == 0.5);
  CHECK(cfg.train.minibatch == 50);
  CHECK(cfg.train.l2_lambda == 0.5);
  CHECK(cfg.train.learning_rate == 0.01);
}

TEST_CASE("config errors exit 2 and name the key") {
  const auto dir = scratch("cfg");
  std::ofstream(dir / "bad.conf") << "k = 3\nlearning_rat = 0.1\n";
  const auto r = run_cli({"train", "--config", (dir / "bad.conf").string(), "--out", dir.string()});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("learning_rat") != std::string::npos);

  CHECK(run_cli({"train", "--set", "k=0", "--out", dir.string()}).code == cli::kConfigError);
  CHECK(run_cli({"train", "--config", (dir / "missing.conf").string()}).code == cli::kConfigError);
  CHECK(run_cli({"frobnicate"}).code == cli::kConfigError);
  CHECK(run_cli({"train", "--set", "patience=3", "--out", dir.string()}).code == cli::kConfigError);
  CHECK(run_cli({"train", "--help"}).code == cli::kOk);
  const auto keys = run_cli({"train", "--list-keys"});
  CHECK(keys.code == cli::kOk);
  CHECK(keys.out.find("learning_rate = 0.01") != std::string::npos);
}

TEST_CASE("missing corpus exits 3") {
  const auto dir = scratch("missing");
  const auto r = run_cli({"train", "--set", "corpus=jsonl", "--set", "train_path=/nonexistent/x.jsonl", "--out",
                          dir.string()});
  CHECK(r.code == cli::kDataError);
}

TEST_CASE("train writes checkpoint, history and a replayable manifest") {
  const auto a = scratch("train_a"), b = scratch("train_b");
  const auto r = run_cli(with({"train", "--out", a.string()}, kSmall));
  REQUIRE(r.code == cli::kOk);
  CHECK(fs::exists(a / "checkpoint.json"));
  const std::string history = slurp(a / "history.csv");
  CHECK(history.rfind("epoch,loss,train_acc,valid_acc\n", 0) == 0);
  CHECK(count_lines(history) == 4);
  const std::string manifest = slurp(a / "manifest.txt");
  CHECK(manifest.find("seed.init = ") != std::string::npos);
  CHECK(manifest.find("epochs = 3") != std::string::npos);

  REQUIRE(run_cli({"train", "--config", (a / "manifest.txt").string(), "--out", b.string()}).code == cli::kOk);
  CHECK(slurp(a / "history.csv") == slurp(b / "history.csv"));
  CHECK(slurp(a / "checkpoint.json") == slurp(b / "checkpoint.json"));
  CHECK(load_checkpoint(b / "checkpoint.json").model.hyper.sentence_length > 0);
}

TEST_CASE("eval after overfitting scores 1.0 on the training set") {
  const auto dir = scratch("eval");
  REQUIRE(run_cli({"gen-synth", "--out", dir.string(), "--set", "synth_train=16", "--set", "synth_test=8", "--set",
                   "synth_min_gap=3"})
              .code == cli::kOk);
  const std::string train_file = (dir / "train.jsonl").string();
  const auto t = run_cli({"train", "--out", (dir / "run").string(), "--set", "corpus=jsonl", "--set",
                          "train_path=" + train_file, "--set", "test_path=" + (dir / "test.jsonl").string(),
                          "--set", "embedding_dim=8", "--set", "filters_per_width=4", "--set", "dropout=0",
                          "--set", "epochs=150", "--set", "minibatch=4", "--set", "l2_lambda=0", "--set",
                          "learning_rate=0.05"});
  REQUIRE(t.code == cli::kOk);
  const std::string ckpt = (dir / "run" / "checkpoint.json").string();
  const auto e1 = run_cli({"eval", "--checkpoint", ckpt, "--data", train_file, "--set", "corpus=jsonl", "--out",
                           (dir / "e1").string()});
  REQUIRE(e1.code == cli::kOk);
  CHECK(e1.out.find("\nopcnn,1.000000,") != std::string::npos);
  const auto e2 = run_cli({"eval", "--checkpoint", ckpt, "--data", train_file, "--set", "corpus=jsonl", "--out",
                           (dir / "e2").string()});
  CHECK(slurp(dir / "e1" / "metrics.csv") == slurp(dir / "e2" / "metrics.csv"));

  std::ofstream(dir / "empty.jsonl") << "";
  CHECK(run_cli({"eval", "--checkpoint", ckpt, "--data", (dir / "empty.jsonl").string(), "--set", "corpus=jsonl",
                 "--out", (dir / "e3").string()})
            .code == cli::kDataError);

  std::ofstream(dir / "foreign.jsonl") << "{\"text\":\"zz yy xx\",\"label\":1}\n";
  const auto oov = run_cli({"eval", "--checkpoint", ckpt, "--data", (dir / "foreign.jsonl").string(), "--set",
                            "corpus=jsonl", "--out", (dir / "e4").string()});
  CHECK(oov.code == cli::kConfigError);
  CHECK(oov.err.find("vocabulary mismatch") != std::string::npos);
  CHECK(run_cli({"eval", "--checkpoint", ckpt, "--data", train_file, "--set", "corpus=jsonl", "--set",
                 "tokenizer=char", "--out", (dir / "e5").string()})
            .code == cli::kConfigError);
  CHECK(run_cli({"eval", "--checkpoint", (dir / "nope.json").string(), "--out", (dir / "e6").string()}).code ==
        cli::kDataError);
}

TEST_CASE("predict") {
  const auto dir = scratch("predict");
  REQUIRE(run_cli(with({"train", "--out", dir.string()}, kSmall)).code == cli::kOk);
  const auto r = run_cli({"predict", "--checkpoint", (dir / "checkpoint.json").string(), "--out",
                          (dir / "p").string()},
                         "f1 MA f2 f3 f4 MB f5\n\nf2 MB f1 f1 f1 MA\n");
  REQUIRE(r.code == cli::kOk);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  REQUIRE(all.size() == 3);
  for (const auto& l : all) {
    const double p = std::stod(l.substr(2, 8));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK((l[0] == '0' || l[0] == '1'));
  }
  CHECK(all[1].size() > 8);
  CHECK(all[1].substr(all[1].size() - 8) == "\tall_pad");
  CHECK(all[0].find("all_pad") == std::string::npos);

  Vocab vocab;
  vocab.add("a");
  auto h = tiny_hyperparams();
  save_checkpoint(dir / "zero.json", Checkpoint{OpcnnModel::zeros(h, vocab.size()), vocab, TokenizerMode::whitespace});
  const auto z = run_cli({"predict", "--checkpoint", (dir / "zero.json").string(), "--out", (dir / "z").string()},
                         "a a\nb\n");
  REQUIRE(z.code == cli::kOk);
  CHECK(z.out == "0\t0.500000\n0\t0.500000\n");
}

TEST_CASE("gradcheck command") {
  const auto dir = scratch("gradcheck");
  const auto ok = run_cli({"gradcheck", "--out", dir.string()});
  CHECK(ok.code == cli::kOk);
  CHECK(ok.out.rfind("group,parameters,max_rel_error,status\n", 0) == 0);
  CHECK(count_lines(ok.out) == 9);
  for (const char* g : {"K[w=2]", "K[w=3]", "conv_bias", "pool_scale", "pool_bias", "out_weight", "out_bias",
                        "embedding"})
    CHECK(ok.out.find(std::string("\n") + g + ",") != std::string::npos);
  const auto bad = run_cli({"gradcheck", "--inject-fault", "--out", dir.string()});
  CHECK(bad.code == cli::kNumericError);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("bench emits four methods and their gains") {
  const auto dir = scratch("bench");
  const auto r = run_cli(with({"bench", "--out", dir.string(), "--set", "bench_sweep=true", "--set",
                               "bench_sweep_sizes=20,30,40,50,60", "--set", "epochs=1"},
                              kSmall));
  REQUIRE(r.code == cli::kOk);
  const std::string bench = slurp(dir / "bench.csv");
  CHECK(count_lines(bench) == 5);
  CHECK(bench.find(",alpha_vs_tfidf\n") != std::string::npos);
  for (const char* m : {"\ntfidf_svm,", "\nbigram_svm,", "\ncnn,", "\nopcnn,"}) CHECK(bench.find(m) != std::string::npos);
  CHECK(count_lines(slurp(dir / "alpha.csv")) == 5);
  const std::string sweep = slurp(dir / "bench_sweep.csv");
  CHECK(sweep.rfind("train_size,tfidf_svm,bigram_svm,cnn,opcnn\n", 0) == 0);
  CHECK(count_lines(sweep) == 6);

  CHECK(run_cli(with({"bench", "--out", dir.string(), "--set", "bench_sweep=true", "--set", "bench_sweep_sizes=500"},
                     kSmall))
            .code == cli::kConfigError);
}

TEST_CASE("ksweep") {
  const auto dir = scratch("ksweep");
  const auto r = run_cli(
      with({"ksweep", "--out", dir.string(), "--set", "ksweep_values=1,3", "--set", "folds=2", "--set", "epochs=1"},
           kSmall));
  REQUIRE(r.code == cli::kOk);
  const std::string csv = slurp(dir / "sweep.csv");
  CHECK(count_lines(csv) == 3);
  CHECK(csv.find("\n1,6,3;4;5,3,1,") != std::string::npos);
  CHECK(csv.find("\n3,6,3;4;5,3,1,") != std::string::npos);
}

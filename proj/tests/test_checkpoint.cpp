#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "opcnn/checkpoint.hpp"

using namespace opcnn;
namespace fs = std::filesystem;

namespace {

Checkpoint sample() {
  Vocab vocab;
  for (const char* t : {"room", "clean", "staff"}) vocab.add(t);
  auto h = tiny_hyperparams();
  return Checkpoint{OpcnnModel::init(h, vocab.size(), 21), vocab, TokenizerMode::character};
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("opcnn_test_ckpt_" + name); }

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  const auto ckpt = sample();
  save_checkpoint(tmp("a.json"), ckpt);
  const auto back = load_checkpoint(tmp("a.json"));
  CHECK(back.model == ckpt.model);
  CHECK(back.vocab.tokens() == ckpt.vocab.tokens());
  CHECK(back.tokenizer == ckpt.tokenizer);

  save_checkpoint(tmp("b.json"), back);
  std::ifstream a(tmp("a.json")), b(tmp("b.json"));
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_CASE("checkpoint validation") {
  save_checkpoint(tmp("c.json"), sample());
  nlohmann::json j;
  std::ifstream(tmp("c.json")) >> j;
  CHECK(j["format_version"] == kCheckpointFormatVersion);

  auto bad_version = j;
  bad_version["format_version"] = 99;
  std::ofstream(tmp("v.json")) << bad_version.dump();
  CHECK_THROWS_AS(load_checkpoint(tmp("v.json")), CheckpointError);

  auto bad_pad = j;
  bad_pad["tensors"]["embedding"]["data"][0] = 0.5;
  std::ofstream(tmp("p.json")) << bad_pad.dump();
  CHECK_THROWS_AS(load_checkpoint(tmp("p.json")), CheckpointError);

  auto bad_shape = j;
  bad_shape["tensors"]["out_bias"]["data"] = nlohmann::json::array({0.0});
  std::ofstream(tmp("s.json")) << bad_shape.dump();
  CHECK_THROWS_AS(load_checkpoint(tmp("s.json")), CheckpointError);

  std::ofstream(tmp("g.json")) << "{not json";
  CHECK_THROWS_AS(load_checkpoint(tmp("g.json")), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(tmp("missing.json")), CheckpointError);
}

TEST_CASE("word2vec text vectors") {
  Vocab vocab;
  vocab.add("room");
  vocab.add("bed");
  Matrix e(vocab.size(), 2);
  std::ofstream(tmp("w2v.txt")) << "3 2\nroom 0.5 -1\nother 9 9\nbed 2 3\n";
  CHECK(load_word2vec_text(tmp("w2v.txt"), vocab, e) == 2);
  CHECK(e(vocab.id("room"), 1) == -1.0);
  CHECK(e(vocab.id("bed"), 0) == 2.0);
  CHECK(e(0, 0) == 0.0);

  Matrix wrong(vocab.size(), 3);
  CHECK_THROWS_AS(load_word2vec_text(tmp("w2v.txt"), vocab, wrong), CorpusError);
}

#include "opcnn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace opcnn {

using nlohmann::json;

namespace {

json tensor_json(std::size_t rows, std::size_t cols, std::span<const double> data) {
  return json{{"shape", {rows, cols}}, {"data", std::vector<double>(data.begin(), data.end())}};
}

json vector_json(std::span<const double> data) {
  return json{{"shape", {data.size()}}, {"data", std::vector<double>(data.begin(), data.end())}};
}

const json& field(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw CheckpointError("checkpoint: missing field '" + key + "'");
  return *it;
}

Matrix read_matrix(const json& tensors, const std::string& key, std::size_t rows, std::size_t cols) {
  const json& t = field(tensors, key);
  const auto shape = field(t, "shape").get<std::vector<std::size_t>>();
  if (shape != std::vector<std::size_t>{rows, cols}) {
    throw CheckpointError("checkpoint: tensor '" + key + "' has unexpected shape");
  }
  return Matrix::checked(rows, cols, field(t, "data").get<std::vector<double>>());
}

Vector read_vector(const json& tensors, const std::string& key, std::size_t len) {
  const json& t = field(tensors, key);
  if (field(t, "shape").get<std::vector<std::size_t>>() != std::vector<std::size_t>{len}) {
    throw CheckpointError("checkpoint: tensor '" + key + "' has unexpected shape");
  }
  auto data = field(t, "data").get<Vector>();
  if (data.size() != len || !all_finite(data)) throw CheckpointError("checkpoint: tensor '" + key + "' is invalid");
  return data;
}

std::string kernel_key(std::size_t width) { return "conv.w" + std::to_string(width) + ".kernels"; }
std::string bias_key(std::size_t width) { return "conv.w" + std::to_string(width) + ".bias"; }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const OpcnnModel& m = ckpt.model;
  const Hyperparams& h = m.hyper;
  json hyper{{"embedding_dim", h.embedding_dim},
             {"filter_widths", h.filter_widths},
             {"filters_per_width", h.filters_per_width},
             {"k", h.k},
             {"dropout_p", h.dropout_p},
             {"sentence_length", h.sentence_length},
             {"pooling_affine", h.pooling_affine},
             {"pool_activation", std::string(to_string(h.pool_activation))},
             {"trainable_embeddings", h.trainable_embeddings}};
  json tensors;
  tensors["embedding"] = tensor_json(m.embedding.rows(), m.embedding.cols(), m.embedding.values());
  for (const auto& g : m.conv) {
    tensors[kernel_key(g.width)] = tensor_json(g.kernels.rows(), g.kernels.cols(), g.kernels.values());
    tensors[bias_key(g.width)] = vector_json(g.bias);
  }
  tensors["pool_scale"] = vector_json(m.pool_scale);
  tensors["pool_bias"] = vector_json(m.pool_bias);
  tensors["out_weight"] = tensor_json(m.out_weight.rows(), m.out_weight.cols(), m.out_weight.values());
  tensors["out_bias"] = vector_json(m.out_bias);

  json doc{{"format_version", kCheckpointFormatVersion},
           {"hyperparams", hyper},
           {"tokenizer", std::string(to_string(ckpt.tokenizer))},
           {"vocab", ckpt.vocab.tokens()},
           {"tensors", tensors}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    const int version = field(doc, "format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw CheckpointError("unsupported checkpoint format_version " + std::to_string(version));
    }
    const json& hj = field(doc, "hyperparams");
    Hyperparams h;
    h.embedding_dim = field(hj, "embedding_dim").get<std::size_t>();
    h.filter_widths = field(hj, "filter_widths").get<std::vector<std::size_t>>();
    h.filters_per_width = field(hj, "filters_per_width").get<std::size_t>();
    h.k = field(hj, "k").get<std::size_t>();
    h.dropout_p = field(hj, "dropout_p").get<double>();
    h.sentence_length = field(hj, "sentence_length").get<std::size_t>();
    h.pooling_affine = field(hj, "pooling_affine").get<bool>();
    h.pool_activation = parse_pool_activation(field(hj, "pool_activation").get<std::string>());
    h.trainable_embeddings = field(hj, "trainable_embeddings").get<bool>();

    Checkpoint ckpt;
    ckpt.tokenizer = parse_tokenizer_mode(field(doc, "tokenizer").get<std::string>());
    ckpt.vocab = Vocab::from_tokens(field(doc, "vocab").get<std::vector<std::string>>());

    OpcnnModel m = OpcnnModel::zeros(h, ckpt.vocab.size());
    const json& t = field(doc, "tensors");
    m.embedding = read_matrix(t, "embedding", ckpt.vocab.size(), h.embedding_dim);
    for (auto& g : m.conv) {
      g.kernels = read_matrix(t, kernel_key(g.width), h.filters_per_width, g.width * h.embedding_dim);
      g.bias = read_vector(t, bias_key(g.width), h.filters_per_width);
    }
    m.pool_scale = read_vector(t, "pool_scale", h.feature_maps());
    m.pool_bias = read_vector(t, "pool_bias", h.feature_maps());
    m.out_weight = read_matrix(t, "out_weight", 2, h.concat_size());
    m.out_bias = read_vector(t, "out_bias", 2);
    for (double v : m.embedding.row(0))
      if (v != 0.0) throw CheckpointError("checkpoint: padding embedding row is not zero");
    ckpt.model = std::move(m);
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("checkpoint " + path.string() + ": " + e.what());
  } catch (const CorpusError& e) {
    throw CheckpointError("checkpoint " + path.string() + ": " + e.what());
  }
}

std::size_t load_word2vec_text(const std::filesystem::path& path, const Vocab& vocab, Matrix& embedding) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open embedding file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CorpusError(path.string() + ": empty embedding file");
  std::size_t count = 0, dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> count >> dim)) throw CorpusError(path.string() + ": bad header, expected \"V m\"");
  }
  if (dim != embedding.cols()) {
    throw CorpusError(path.string() + ": vectors have dimension " + std::to_string(dim) + ", model uses " +
                      std::to_string(embedding.cols()));
  }
  std::size_t filled = 0, line_no = 1;
  Vector values(dim);
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream row(line);
    std::string token;
    if (!(row >> token)) continue;
    for (auto& v : values) {
      if (!(row >> v)) throw CorpusError(path.string() + ": line " + std::to_string(line_no) + " has too few values");
    }
    if (!vocab.contains(token)) continue;
    const std::int32_t id = vocab.id(token);
    if (id < 2) continue;
    std::copy(values.begin(), values.end(), embedding.row(static_cast<std::size_t>(id)).begin());
    ++filled;
  }
  return filled;
}

}  // namespace opcnn

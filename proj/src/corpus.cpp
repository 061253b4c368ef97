#include "opcnn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "opcnn/rng.hpp"

namespace opcnn {

namespace fs = std::filesystem;

TokenizerMode parse_tokenizer_mode(std::string_view name) {
  if (name == "whitespace") return TokenizerMode::whitespace;
  if (name == "char") return TokenizerMode::character;
  throw std::invalid_argument("unknown tokenizer mode '" + std::string(name) + "' (expected whitespace|char)");
}

std::string_view to_string(TokenizerMode mode) {
  return mode == TokenizerMode::whitespace ? "whitespace" : "char";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::jsonl: return "jsonl";
    case Provenance::ott: return "ott";
    case Provenance::synthetic: return "synthetic";
  }
  return "unknown";
}

namespace {

// Decodes one UTF-8 sequence starting at text[pos]. Returns the code point and
// its byte length; malformed input decodes as a single byte.
std::pair<char32_t, std::size_t> decode_utf8(std::string_view text, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  std::size_t len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0 && b0 < 0xF8) {
    len = 4;
    cp = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else {
    return {cp, 1};
  }
  if (b0 >= 0xF8 || pos + len > text.size()) return {b0, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xC0) != 0x80) return {b0, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, TokenizerMode mode) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto [cp, len] = decode_utf8(text, pos);
    std::string_view bytes = text.substr(pos, len);
    pos += len;
    if (is_unicode_space(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (mode == TokenizerMode::character) {
      tokens.emplace_back(bytes);
    } else {
      current.append(bytes);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocab::Vocab() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw CorpusError("vocabulary must start with the reserved <pad> and <unk> tokens");
  }
  Vocab v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw CorpusError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  // The reserved spellings are not real tokens.
  return it == ids_.end() || it->second < 2 ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

std::int32_t Vocab::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

Vocab build_vocab(std::span<const Dataset> datasets, TokenizerMode mode, std::size_t min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  struct Entry {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> stats;
  std::vector<std::string> order;
  for (const auto& ds : datasets) {
    for (const auto& doc : ds.documents) {
      for (auto& tok : tokenize(doc.text, mode)) {
        auto [it, inserted] = stats.try_emplace(tok, Entry{0, order.size()});
        if (inserted) order.push_back(tok);
        ++it->second.count;
      }
    }
  }
  std::vector<const std::string*> kept;
  for (const auto& tok : order)
    if (stats[tok].count >= min_count && tok != Vocab::kPadToken && tok != Vocab::kUnkToken) kept.push_back(&tok);
  std::stable_sort(kept.begin(), kept.end(), [&](const std::string* a, const std::string* b) {
    return stats[*a].count > stats[*b].count;
  });
  Vocab vocab;
  for (const auto* tok : kept) vocab.add(*tok);
  return vocab;
}

std::vector<std::int32_t> encode(std::span<const std::string> tokens, const Vocab& vocab, std::size_t n) {
  if (n < 1) throw std::invalid_argument("encode: sentence length must be >= 1");
  std::vector<std::int32_t> ids(n, Vocab::kPad);
  const std::size_t used = std::min(n, tokens.size());
  for (std::size_t i = 0; i < used; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

Dataset load_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  Dataset ds;
  ds.provenance = Provenance::jsonl;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw CorpusError(where + ": expected a JSON object");
    auto text = obj.find("text");
    if (text == obj.end() || !text->is_string()) throw CorpusError(where + ": missing string field \"text\"");
    auto label = obj.find("label");
    if (label == obj.end() || !label->is_number_integer()) {
      throw CorpusError(where + ": missing integer field \"label\"");
    }
    const auto value = label->get<long long>();
    if (value != 0 && value != 1) throw CorpusError(where + ": label must be 0 or 1, got " + std::to_string(value));
    Document doc{text->get<std::string>(), static_cast<int>(value), 0};
    if (auto fold = obj.find("fold"); fold != obj.end() && fold->is_number_integer()) doc.fold = fold->get<int>();
    ds.documents.push_back(std::move(doc));
  }
  return ds;
}

void write_jsonl(const fs::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& doc : data.documents) {
    nlohmann::json obj{{"text", doc.text}, {"label", doc.label}};
    if (doc.fold != 0) obj["fold"] = doc.fold;
    out << obj.dump() << '\n';
  }
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

fs::path find_class_dir(const fs::path& polarity_dir, const std::string& cls) {
  const std::string prefix = cls + "_from_";
  std::vector<fs::path> hits;
  for (const auto& p : sorted_entries(polarity_dir)) {
    if (fs::is_directory(p) && p.filename().string().starts_with(prefix)) hits.push_back(p);
  }
  const std::string name = polarity_dir.filename().string() + "/" + prefix + "*";
  if (hits.empty()) throw CorpusError("Ott corpus: missing class directory " + name);
  if (hits.size() > 1) throw CorpusError("Ott corpus: more than one directory matches " + name);
  return hits.front();
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  return text;
}

}  // namespace

Dataset load_ott(const fs::path& root) {
  if (!fs::is_directory(root)) throw CorpusError("Ott corpus root " + root.string() + " is not a directory");
  Dataset ds;
  ds.provenance = Provenance::ott;
  for (const char* polarity : {"negative_polarity", "positive_polarity"}) {
    const fs::path pol_dir = root / polarity;
    if (!fs::is_directory(pol_dir)) throw CorpusError(std::string("Ott corpus: missing directory ") + polarity);
    for (const char* cls : {"deceptive", "truthful"}) {
      const fs::path class_dir = find_class_dir(pol_dir, cls);
      const int label = std::string_view(cls) == "deceptive" ? kDeceptive : kTruthful;
      for (const auto& fold_dir : sorted_entries(class_dir)) {
        const std::string name = fold_dir.filename().string();
        if (!fs::is_directory(fold_dir) || !name.starts_with("fold")) continue;
        int fold = 0;
        try {
          fold = std::stoi(name.substr(4));
        } catch (const std::exception&) {
          throw CorpusError("Ott corpus: bad fold directory " + fold_dir.string());
        }
        for (const auto& file : sorted_entries(fold_dir)) {
          if (file.extension() != ".txt") continue;
          ds.documents.push_back({read_text_file(file), label, fold});
        }
      }
    }
  }
  return ds;
}

Folds kfold_indices(std::size_t size, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  if (k > size) {
    throw std::invalid_argument("kfold: k=" + std::to_string(k) + " exceeds dataset size " + std::to_string(size));
  }
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span(idx));
  Folds folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = size / k + (f < size % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos), idx.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return folds;
}

Folds kfold_split(const Dataset& data, std::size_t k, std::uint64_t seed) {
  return kfold_indices(data.size(), k, seed);
}

Folds folds_from_layout(const Dataset& data) {
  std::map<int, std::vector<std::size_t>> by_fold;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int f = data.documents[i].fold;
    if (f <= 0) throw CorpusError("document " + std::to_string(i) + " carries no fold id");
    by_fold[f].push_back(i);
  }
  Folds folds;
  for (auto& [_, idx] : by_fold) folds.push_back(std::move(idx));
  return folds;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.provenance = data.provenance;
  out.documents.reserve(indices.size());
  for (auto i : indices) out.documents.push_back(data.documents.at(i));
  return out;
}

std::vector<std::size_t> balanced_indices(std::span<const int> labels, std::uint64_t seed) {
  std::vector<std::size_t> by_label[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("labels must be 0 or 1");
    by_label[labels[i]].push_back(i);
  }
  const std::size_t keep = std::min(by_label[0].size(), by_label[1].size());
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& idx : by_label) {
    rng.shuffle(std::span(idx));
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Dataset balanced_downsample(const Dataset& data, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& doc : data.documents) labels.push_back(doc.label);
  return subset(data, balanced_indices(labels, seed));
}

std::size_t length_percentile(const Dataset& data, TokenizerMode mode, double q) {
  if (data.empty()) return 1;
  std::vector<std::size_t> lengths;
  lengths.reserve(data.size());
  for (const auto& doc : data.documents) lengths.push_back(tokenize(doc.text, mode).size());
  std::sort(lengths.begin(), lengths.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(lengths.size())));
  rank = std::clamp<std::size_t>(rank, 1, lengths.size());
  return std::max<std::size_t>(1, lengths[rank - 1]);
}

Dataset gen_order_task(std::size_t n_samples, std::size_t filler_vocab_size, std::size_t min_gap,
                       std::uint64_t seed) {
  if (min_gap < 1) throw std::invalid_argument("gen_order_task: min_gap must be >= 1");
  if (filler_vocab_size < 1) throw std::invalid_argument("gen_order_task: filler vocabulary must be non-empty");
  Rng rng(seed);
  std::vector<int> labels(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) labels[i] = static_cast<int>(i % 2);
  rng.shuffle(std::span(labels));

  auto span_len = [&] { return min_gap + static_cast<std::size_t>(rng.below(min_gap + 1)); };
  auto fillers = [&](std::string& out, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      out += 'f';
      out += std::to_string(rng.below(filler_vocab_size));
      out += ' ';
    }
  };

  Dataset ds;
  ds.provenance = Provenance::synthetic;
  ds.documents.reserve(n_samples);
  for (int label : labels) {
    const std::size_t prefix = span_len(), gap = span_len(), suffix = span_len();
    const std::string_view first = label == 1 ? kMarkerA : kMarkerB;
    const std::string_view second = label == 1 ? kMarkerB : kMarkerA;
    std::string text;
    fillers(text, prefix);
    text.append(first).push_back(' ');
    fillers(text, gap);
    text.append(second).push_back(' ');
    fillers(text, suffix);
    text.pop_back();
    ds.documents.push_back({std::move(text), label, 0});
  }
  return ds;
}

}  // namespace opcnn

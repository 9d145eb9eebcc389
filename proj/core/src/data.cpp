#include "gpte/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>

#include "gpte/error.hpp"
#include "gpte/rng.hpp"

namespace gpte::data {

TokenizerSpec TokenizerSpec::byte() {
  TokenizerSpec spec;
  spec.kind = TokenizerKind::kByte;
  spec.vocab_size = 256;
  return spec;
}

TokenizerSpec TokenizerSpec::char_vocab(std::string_view corpus) {
  std::array<bool, 256> seen{};
  for (char c : corpus) seen[static_cast<std::uint8_t>(c)] = true;
  TokenizerSpec spec;
  spec.kind = TokenizerKind::kCharVocab;
  for (std::size_t b = 0; b < 256; ++b) {
    if (seen[b]) spec.vocab.push_back(static_cast<std::uint8_t>(b));
  }
  spec.vocab_size = spec.vocab.size() + 1;  // + unknown slot
  return spec;
}

std::vector<std::int32_t> encode(std::string_view text, const TokenizerSpec& spec) {
  std::vector<std::int32_t> ids;
  ids.reserve(text.size());
  if (spec.kind == TokenizerKind::kByte) {
    for (char c : text) ids.push_back(static_cast<std::uint8_t>(c));
    return ids;
  }
  std::array<std::int32_t, 256> lookup;
  lookup.fill(static_cast<std::int32_t>(spec.unknown_id()));
  for (std::size_t i = 0; i < spec.vocab.size(); ++i) {
    lookup[spec.vocab[i]] = static_cast<std::int32_t>(i);
  }
  for (char c : text) ids.push_back(lookup[static_cast<std::uint8_t>(c)]);
  return ids;
}

std::string decode(std::span<const std::int32_t> ids, const TokenizerSpec& spec) {
  std::string text;
  text.reserve(ids.size());
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= spec.vocab_size) {
      throw DataError("decode: id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(spec.vocab_size));
    }
    if (spec.kind == TokenizerKind::kByte) {
      text.push_back(static_cast<char>(id));
    } else if (static_cast<std::size_t>(id) == spec.unknown_id()) {
      text.push_back('?');
    } else {
      text.push_back(static_cast<char>(spec.vocab[static_cast<std::size_t>(id)]));
    }
  }
  return text;
}

CorpusSplit split_corpus(std::vector<std::int32_t> tokens, double validation_fraction) {
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw ConfigError("split: validation fraction must be in [0, 1), got " +
                      std::to_string(validation_fraction));
  }
  CorpusSplit split;
  split.split_fraction = validation_fraction;
  const auto val_len = static_cast<std::size_t>(
      static_cast<double>(tokens.size()) * validation_fraction);
  const std::size_t train_len = tokens.size() - val_len;
  split.validation.assign(tokens.begin() + static_cast<std::ptrdiff_t>(train_len), tokens.end());
  tokens.resize(train_len);
  split.train = std::move(tokens);
  return split;
}

std::size_t window_count(std::size_t token_count, std::size_t seq_len) {
  if (token_count < seq_len + 1) return 0;
  return (token_count - 1) / seq_len;
}

std::vector<Batch> make_batches(std::span<const std::int32_t> tokens, std::size_t batch_size,
                                std::size_t seq_len, std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (seq_len == 0) throw ConfigError("seq_len must be positive");
  const std::size_t windows = window_count(tokens.size(), seq_len);
  if (windows == 0) {
    throw DataError("make_batches: corpus of " + std::to_string(tokens.size()) +
                    " tokens is shorter than seq_len+1 = " + std::to_string(seq_len + 1));
  }

  std::vector<std::size_t> order(windows);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng = Rng::from_stream(seed, epoch);
  rng.shuffle(order);

  std::vector<Batch> batches;
  batches.reserve((windows + batch_size - 1) / batch_size);
  for (std::size_t begin = 0; begin < windows; begin += batch_size) {
    const std::size_t rows = std::min(batch_size, windows - begin);
    Batch batch;
    batch.batch = rows;
    batch.time = seq_len;
    batch.inputs.reserve(rows * seq_len);
    batch.targets.reserve(rows * seq_len);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t start = order[begin + r] * seq_len;
      for (std::size_t t = 0; t < seq_len; ++t) {
        batch.inputs.push_back(tokens[start + t]);
        batch.targets.push_back(tokens[start + t + 1]);
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw DataError("cannot open file: " + path.string());
  }
  std::string text;
  file.seekg(0, std::ios::end);
  text.resize(static_cast<std::size_t>(file.tellg()));
  file.seekg(0, std::ios::beg);
  file.read(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) {
    throw DataError("failed reading file: " + path.string());
  }
  return text;
}

}  // namespace gpte::data

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gpte::data {

enum class TokenizerKind { kByte, kCharVocab };

// kByte maps text to raw UTF-8 byte values (V = 256). kCharVocab maps each
// distinct corpus byte to a dense id with one extra unknown slot; unknown
// bytes encode to the last id and decode to '?'.
struct TokenizerSpec {
  TokenizerKind kind = TokenizerKind::kByte;
  std::vector<std::uint8_t> vocab;  // sorted distinct bytes; kCharVocab only
  std::size_t vocab_size = 256;

  static TokenizerSpec byte();
  static TokenizerSpec char_vocab(std::string_view corpus);

  std::size_t unknown_id() const { return vocab_size - 1; }
};

std::vector<std::int32_t> encode(std::string_view text, const TokenizerSpec& spec);
std::string decode(std::span<const std::int32_t> ids, const TokenizerSpec& spec);

// Train tokens followed by the contiguous validation tail.
struct CorpusSplit {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> validation;
  double split_fraction = 0.1;
};

CorpusSplit split_corpus(std::vector<std::int32_t> tokens, double validation_fraction = 0.1);

// One training batch; targets are the inputs shifted one position ahead in
// the source stream. `batch` may be smaller than requested for the final
// batch of an epoch.
struct Batch {
  std::vector<std::int32_t> inputs;
  std::vector<std::int32_t> targets;
  std::size_t batch = 0;
  std::size_t time = 0;
};

// Non-overlapping windows of length seq_len+1, shuffled by (seed, epoch) and
// grouped into batches. Every window appears exactly once per epoch; the
// order is a pure function of the arguments.
std::vector<Batch> make_batches(std::span<const std::int32_t> tokens, std::size_t batch_size,
                                std::size_t seq_len, std::uint64_t seed, std::uint64_t epoch);

std::size_t window_count(std::size_t token_count, std::size_t seq_len);

// Whole-file read; DataError on failure.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace gpte::data

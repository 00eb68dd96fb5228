#pragma once

// Checkpoint container. One record per tensor, in name order:
//
//   <name> <ndim> <d1> ... <dk>\n
//   <d1*...*dk little-endian IEEE-754 doubles, row-major>
//
// followed by a single trailing metadata line
//
//   meta layers=<n> hidden=<n> embed_dim=<n> src_vocab_size=<n>
//        tgt_vocab_size=<n> dropout_rate=<x> src_vocab_checksum=<hex>
//        tgt_vocab_checksum=<hex>\n
//
// (one line, shown wrapped). Loading checks every name and shape against
// the configuration in the metadata record.

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "kdseq/model.hpp"

namespace kdseq {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  std::uint64_t src_vocab_checksum = 0;
  std::uint64_t tgt_vocab_checksum = 0;
};

struct Checkpoint {
  Seq2SeqModel model;
  CheckpointMeta meta;
};

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kdseq

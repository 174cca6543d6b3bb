#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "b2dcnn/config.hpp"
#include "b2dcnn/model.hpp"

namespace b2dcnn {

// Checkpoint file errors carry a kind so callers can tell apart a wrong
// file, a future format, and a damaged one.
class CheckpointError : public DataError {
 public:
  enum class Kind { BadMagic, UnsupportedVersion, Truncated, Malformed };

  CheckpointError(Kind kind, const std::string& msg) : DataError(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Checkpoint {
  RunConfig config;                      // snapshot minus paths/threads
  std::vector<std::string> label_names;  // class index order
  std::vector<std::string> vocab_tokens; // vocabulary index order, row 0 = <unk>
  ModelParams params;
};

// Binary format, little-endian throughout:
//   bytes 0..6   magic "B2DCNN\0"
//   byte  7      format version (currently 1)
//   config block (u32/f64/u64 scalars in fixed order)
//   label names, then vocabulary: u32 count, then u32 length + UTF-8 bytes each
//   tensors in canonical order: u32 rows, u32 cols, rows*cols f64 raw
// Round-trips are bitwise: tensors are written as raw IEEE-754 bytes.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace b2dcnn

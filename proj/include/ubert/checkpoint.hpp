#pragma once

// Binary layout, all integers and floats little-endian:
//
//   "UBRT"  u32 version
//   model config: u64 vocab_size hidden_dim ffn_dim encoder_layers
//                 encoder_heads max_len seed, u8 linear_span_ffn
//   vocabulary:   u32 count, then per entry u32 length + bytes
//   parameters:   u32 count, then per parameter
//                 u32 name length, name bytes, u32 rank, u64 dims[rank],
//                 f64 values[prod(dims)] in row-major order

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ubert/data_io.hpp"
#include "ubert/model.hpp"

namespace ubert {

inline constexpr char kCheckpointMagic[4] = {'U', 'B', 'R', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Parameter section alone; usable for any named tensor list.
void write_parameters(std::ostream& out, const std::vector<const Parameter*>& params);
std::vector<Parameter> read_parameters(std::istream& in);

struct Checkpoint {
  std::unique_ptr<UbertModel> model;
  Vocabulary vocab;
};

void save_checkpoint(std::ostream& out, const UbertModel& model, const Vocabulary& vocab);
void save_checkpoint(const std::filesystem::path& path, const UbertModel& model, const Vocabulary& vocab);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ubert

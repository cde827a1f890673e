#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "csdg/classifier.hpp"
#include "csdg/condflow.hpp"
#include "csdg/data.hpp"
#include "csdg/hash.hpp"
#include "csdg/tensor.hpp"

namespace csdg {

// Binary checkpoint container, all integers little-endian:
//
//   "CSDG"                      4 bytes magic
//   version                     u32
//   metadata length             u32, followed by that many bytes of
//                               "key=value\n" lines sorted by key
//   tensors until end of file:
//     name length               u32, followed by the name bytes
//     rank                      u32 (1 or 2)
//     dims                      rank x u64
//     values                    prod(dims) x IEEE-754 binary64
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor2 value;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::map<std::string, std::string> metadata;
  std::vector<NamedTensor> tensors;

  const std::string& meta(const std::string& key) const;
  const Tensor2& tensor(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file_bytes(const std::filesystem::path& path);

std::string format_norm_stats(const NormStats& stats);
NormStats parse_norm_stats(std::string_view text);

Checkpoint classifier_checkpoint(const ClassifierModel& model, const Schema& schema,
                                 const NormStats& stats, const ClassifierHyper& hyper,
                                 std::uint64_t seed);
// Rejects checkpoints of another stage. The returned model is frozen.
ClassifierModel classifier_from_checkpoint(const Checkpoint& ckpt);

// classifier_hash identifies the exact classifier checkpoint the flow was
// trained against.
Checkpoint flow_checkpoint(const CondFlowModel& model, const Schema& schema,
                           const NormStats& stats, const FlowHyper& hyper, std::uint64_t seed,
                           std::uint64_t classifier_hash);
CondFlowModel flow_from_checkpoint(const Checkpoint& ckpt);

}  // namespace csdg

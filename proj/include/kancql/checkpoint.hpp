#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kancql/binary_io.hpp"
#include "kancql/matrix.hpp"

namespace kancql {

inline constexpr char kCheckpointMagic[4] = {'K', 'C', 'Q', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

// Layout: "KCQL" | u32 version | u64 manifest length | manifest JSON |
// f64 little-endian payload, tensors in manifest order.
//
// The manifest is {"meta": {...}, "tensors": [{"name", "rows", "cols"}, ...]}.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kancql

#include "kancql/checkpoint.hpp"

#include <fstream>

namespace kancql {

std::string_view to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::BadMagic: return "bad magic";
    case FormatErrorKind::VersionMismatch: return "version mismatch";
    case FormatErrorKind::Truncated: return "truncated file";
    case FormatErrorKind::DimMismatch: return "dim mismatch";
    case FormatErrorKind::EmptyDataset: return "empty dataset";
    case FormatErrorKind::BadManifest: return "bad manifest";
  }
  return "format error";
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw FormatError(FormatErrorKind::BadManifest, "checkpoint has no tensor '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["meta"] = ckpt.meta;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    manifest["tensors"].push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  }
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(kCheckpointMagic, 4);
  binio::write_le<std::uint32_t>(os, kCheckpointVersion);
  binio::write_le<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) binio::write_le<double>(os, t.value.values());
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");

  const std::string magic = binio::read_bytes(is, 4, "magic");
  if (magic != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError(FormatErrorKind::BadMagic, "'" + path.string() + "' is not a KCQL checkpoint");
  }
  const auto version = binio::read_le<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorKind::VersionMismatch,
                      "checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  const auto len = binio::read_le<std::uint64_t>(is, "manifest length");
  const std::string text = binio::read_bytes(is, static_cast<std::size_t>(len), "manifest");

  Checkpoint ckpt;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
    ckpt.meta = manifest.at("meta");
    for (const auto& entry : manifest.at("tensors")) {
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      ckpt.tensors.push_back({entry.at("name").get<std::string>(), Matrix(rows, cols)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::BadManifest, e.what());
  }
  for (auto& t : ckpt.tensors) binio::read_le<double>(is, t.value.values(), t.name.c_str());
  return ckpt;
}

}  // namespace kancql

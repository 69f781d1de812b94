#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "cardioflow/edspace/ssm.hpp"
#include "cardioflow/inference/motion_pca.hpp"
#include "cardioflow/models/code_table.hpp"
#include "cardioflow/models/networks.hpp"

namespace cardioflow::app {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything a pipeline stage hands to the next. Stages fill in their own
/// sections; an absent optional means the section was not in the file.
struct Checkpoint {
  std::optional<edspace::Ssm> ssm;
  std::optional<edspace::NormalizationSpec> normalization;
  std::optional<models::ShapeNet> shape;
  std::optional<Eigen::MatrixXd> pretrain_codes;  // code_dim x augmented shapes
  std::optional<models::MotionNet> motion;
  std::optional<models::CodeTable> codes;
  std::optional<inference::MotionPca> motion_pca;
  std::string config;  // JSON snapshot of the run that wrote the file
};

/// Container layout: "CFLW", u32 version, u32 section count, then per
/// section a u32 name length, the name, a u64 payload length and the
/// payload; a trailing CRC32 covers every preceding byte. Integers and reals
/// are little-endian, reals are IEEE binary64.
std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws CheckpointError on bad magic, unsupported version, checksum
/// mismatch or malformed sections. `source` names the input in messages.
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cardioflow::app

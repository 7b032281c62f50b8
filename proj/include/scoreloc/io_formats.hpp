#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scoreloc/geometry.hpp"
#include "scoreloc/prediction_grid.hpp"
#include "scoreloc/scene_model.hpp"

namespace scoreloc {

struct FrameRecord {
  std::uint32_t index = 0;
  ColourImage rgb;
  DepthImage depth;
  RigidPosed pose;  // camera-to-world
  CameraIntrinsics intrinsics;
};

/// On-disk sequence layouts.
///
///  seven_scenes_like: frame-NNNNNN.color.png (8-bit RGB),
///    frame-NNNNNN.depth.png (16-bit millimetres, 65535 = invalid),
///    frame-NNNNNN.pose.txt (4x4 row-major camera-to-world).
///  synthetic_native: as above, but depth is frame-NNNNNN.depth.bin holding
///    float32 metres, so generated depth keeps full precision.
///
/// Both read intrinsics from intrinsics.txt in the sequence directory, with an
/// optional per-frame frame-NNNNNN.intrinsics.txt override.
enum class SequenceFormat { seven_scenes_like, synthetic_native };

SequenceFormat parse_sequence_format(const std::string& name);
std::string to_string(SequenceFormat format);

std::vector<FrameRecord> load_sequence(const std::filesystem::path& dir, SequenceFormat format);
void save_sequence(const std::vector<FrameRecord>& frames, const std::filesystem::path& dir,
                   SequenceFormat format);

std::string frame_stem(std::uint32_t index);

CameraIntrinsics load_intrinsics(const std::filesystem::path& path);
void save_intrinsics(const CameraIntrinsics& k, const std::filesystem::path& path);

RigidPosed load_pose(const std::filesystem::path& path);
void save_pose(const RigidPosed& pose, const std::filesystem::path& path);

// PNG helpers (8-bit RGB and 16-bit grey).
ColourImage read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const ColourImage& image, const std::filesystem::path& path);
Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path);
void write_png_gray16(const Image<std::uint16_t>& image, const std::filesystem::path& path);

/// Millimetre depth to metres; 0 and 65535 become invalid.
DepthImage depth_from_millimetres(const Image<std::uint16_t>& mm);
Image<std::uint16_t> depth_to_millimetres(const DepthImage& depth);

/// Binary prediction file shared with offline trainers. Little-endian:
///   char[4] "SCPR", u32 version (1), u32 frame_index, u32 grid_width,
///   u32 grid_height, grid_width*grid_height float32 triples (row-major),
///   validity bitmap of ceil(cells/8) bytes (bit i%8 of byte i/8, LSB first).
struct PredictionFile {
  std::uint32_t frame_index = 0;
  PredictionGrid grid;

  friend bool operator==(const PredictionFile&, const PredictionFile&) = default;
};

inline constexpr std::uint32_t kPredictionFileVersion = 1;

void save_predictions(const PredictionFile& file, const std::filesystem::path& path);
PredictionFile load_predictions(const std::filesystem::path& path);
std::filesystem::path prediction_path(const std::filesystem::path& dir, std::uint32_t frame_index);

/// Scene model file. Little-endian:
///   char[4] "SCPM", u32 version (1), u64 point count, then per point
///   float32 x, y, z followed by u8 r, g, b.
void save_scene_model(const ScenePointModel& model, const std::filesystem::path& path);
ScenePointModel load_scene_model(const std::filesystem::path& path);

}  // namespace scoreloc

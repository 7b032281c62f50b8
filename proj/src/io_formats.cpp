#include "scoreloc/io_formats.hpp"

#include "byte_stream.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

namespace scoreloc {

namespace fs = std::filesystem;

namespace {

using detail::ByteReader;
using detail::ByteWriter;

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

char g_png_error[256];

void png_error_handler(png_structp png, png_const_charp msg) {
  std::snprintf(g_png_error, sizeof g_png_error, "%s", msg);
  png_longjmp(png, 1);
}

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads a PNG into raw rows. bit_depth is 8 (RGB out) or 16 (grey out).
bool read_png_raw(const char* path, bool want_gray16, int& width, int& height,
                  std::vector<std::uint8_t>& buffer) {
  FilePtr fp(std::fopen(path, "rb"));
  if (!fp) {
    std::snprintf(g_png_error, sizeof g_png_error, "cannot open file");
    return false;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int colour_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  std::size_t row_bytes = 0;
  if (want_gray16) {
    if (colour_type != PNG_COLOR_TYPE_GRAY || depth != 16) {
      std::snprintf(g_png_error, sizeof g_png_error, "expected a 16-bit greyscale PNG");
      png_destroy_read_struct(&png, &info, nullptr);
      return false;
    }
    if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
    row_bytes = static_cast<std::size_t>(width) * 2;
  } else {
    if (depth == 16) png_set_strip_16(png);
    if (colour_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (colour_type == PNG_COLOR_TYPE_GRAY || colour_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
    if (colour_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    row_bytes = static_cast<std::size_t>(width) * 3;
  }
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != row_bytes) {
    std::snprintf(g_png_error, sizeof g_png_error, "unsupported PNG layout");
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  buffer.assign(row_bytes * static_cast<std::size_t>(height), 0);
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool write_png_raw(const char* path, bool gray16, int width, int height,
                   std::vector<std::uint8_t>& buffer) {
  FilePtr fp(std::fopen(path, "wb"));
  if (!fp) {
    std::snprintf(g_png_error, sizeof g_png_error, "cannot open file for writing");
    return false;
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               gray16 ? 16 : 8, gray16 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_write_info(png, info);
  if (gray16 && std::endian::native == std::endian::little) png_set_swap(png);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * (gray16 ? 2 : 3);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + row_bytes * y;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

ColourImage read_png_rgb(const fs::path& path) {
  int w = 0, h = 0;
  std::vector<std::uint8_t> buf;
  if (!read_png_raw(path.c_str(), false, w, h, buf)) {
    throw FormatError(path.string() + ": " + g_png_error);
  }
  ColourImage img(w, h);
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    img.data()[i] = {buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  }
  return img;
}

void write_png_rgb(const ColourImage& image, const fs::path& path) {
  std::vector<std::uint8_t> buf;
  buf.reserve(image.data().size() * 3);
  for (const Rgb8& c : image.data()) buf.insert(buf.end(), c.begin(), c.end());
  if (!write_png_raw(path.c_str(), false, image.width(), image.height(), buf)) {
    throw FormatError(path.string() + ": " + g_png_error);
  }
}

Image<std::uint16_t> read_png_gray16(const fs::path& path) {
  int w = 0, h = 0;
  std::vector<std::uint8_t> buf;
  if (!read_png_raw(path.c_str(), true, w, h, buf)) {
    throw FormatError(path.string() + ": " + g_png_error);
  }
  Image<std::uint16_t> img(w, h);
  std::memcpy(img.data().data(), buf.data(), buf.size());
  return img;
}

void write_png_gray16(const Image<std::uint16_t>& image, const fs::path& path) {
  std::vector<std::uint8_t> buf(image.data().size() * 2);
  std::memcpy(buf.data(), image.data().data(), buf.size());
  if (!write_png_raw(path.c_str(), true, image.width(), image.height(), buf)) {
    throw FormatError(path.string() + ": " + g_png_error);
  }
}

DepthImage depth_from_millimetres(const Image<std::uint16_t>& mm) {
  DepthImage depth(mm.width(), mm.height(), kInvalidDepth);
  for (std::size_t i = 0; i < mm.data().size(); ++i) {
    const std::uint16_t v = mm.data()[i];
    if (v != 0 && v != 65535) depth.data()[i] = static_cast<float>(v) / 1000.0f;
  }
  return depth;
}

Image<std::uint16_t> depth_to_millimetres(const DepthImage& depth) {
  Image<std::uint16_t> mm(depth.width(), depth.height(), 65535);
  for (std::size_t i = 0; i < depth.data().size(); ++i) {
    const float d = depth.data()[i];
    if (is_valid_depth(d)) {
      const long v = std::lround(static_cast<double>(d) * 1000.0);
      if (v > 0 && v < 65535) mm.data()[i] = static_cast<std::uint16_t>(v);
    }
  }
  return mm;
}

SequenceFormat parse_sequence_format(const std::string& name) {
  if (name == "seven_scenes_like") return SequenceFormat::seven_scenes_like;
  if (name == "synthetic_native") return SequenceFormat::synthetic_native;
  throw ConfigError("unknown sequence format '" + name + "'");
}

std::string to_string(SequenceFormat format) {
  return format == SequenceFormat::seven_scenes_like ? "seven_scenes_like" : "synthetic_native";
}

std::string frame_stem(std::uint32_t index) {
  std::ostringstream s;
  s << "frame-" << std::setw(6) << std::setfill('0') << index;
  return s.str();
}

CameraIntrinsics load_intrinsics(const fs::path& path) {
  const auto kv = read_key_values(path);
  CameraIntrinsics k;
  try {
    k.fx = std::stod(kv.at("fx"));
    k.fy = std::stod(kv.at("fy"));
    k.cx = std::stod(kv.at("cx"));
    k.cy = std::stod(kv.at("cy"));
    k.width = std::stoi(kv.at("width"));
    k.height = std::stoi(kv.at("height"));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": intrinsics need fx, fy, cx, cy, width, height");
  }
  try {
    k.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return k;
}

void save_intrinsics(const CameraIntrinsics& k, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << std::setprecision(17) << "fx = " << k.fx << "\nfy = " << k.fy << "\ncx = " << k.cx
      << "\ncy = " << k.cy << "\nwidth = " << k.width << "\nheight = " << k.height << "\n";
}

RigidPosed load_pose(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingPose("missing pose file " + path.string());
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!(in >> m(r, c))) throw FormatError(path.string() + ": expected 16 numbers");
    }
  }
  if (!m.allFinite()) throw FormatError(path.string() + ": non-finite pose");
  RigidPosed pose = RigidPosed::FromMatrix(m);
  if (!is_valid_rotation(pose.rotation, 1e-3)) {
    throw FormatError(path.string() + ": rotation block is not a rotation");
  }
  pose.rotation = orthonormalise(pose.rotation);
  return pose;
}

void save_pose(const RigidPosed& pose, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const Eigen::Matrix4d m = pose.matrix();
  out << std::setprecision(17);
  for (int r = 0; r < 4; ++r) {
    out << m(r, 0) << ' ' << m(r, 1) << ' ' << m(r, 2) << ' ' << m(r, 3) << '\n';
  }
}

namespace {

DepthImage load_depth_bin(const fs::path& path) {
  ByteReader in(path);
  in.expect_magic("SCDB");
  const std::uint32_t w = in.u32();
  const std::uint32_t h = in.u32();
  in.need(static_cast<std::size_t>(w) * h * 4);
  DepthImage depth(static_cast<int>(w), static_cast<int>(h));
  for (float& d : depth.data()) d = in.f32();
  normalise_depth(depth);
  return depth;
}

void save_depth_bin(const DepthImage& depth, const fs::path& path) {
  ByteWriter out;
  out.magic("SCDB");
  out.u32(static_cast<std::uint32_t>(depth.width()));
  out.u32(static_cast<std::uint32_t>(depth.height()));
  for (float d : depth.data()) out.f32(d);
  out.write_to(path);
}

}  // namespace

std::vector<FrameRecord> load_sequence(const fs::path& dir, SequenceFormat format) {
  if (!fs::is_directory(dir)) throw FormatError(dir.string() + " is not a directory");

  static const std::regex kColour(R"(frame-(\d{6})\.color\.png)");
  std::vector<std::uint32_t> indices;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, kColour)) {
      indices.push_back(static_cast<std::uint32_t>(std::stoul(m[1].str())));
    }
  }
  std::sort(indices.begin(), indices.end());

  std::optional<CameraIntrinsics> sequence_k;
  if (fs::exists(dir / "intrinsics.txt")) sequence_k = load_intrinsics(dir / "intrinsics.txt");

  std::vector<FrameRecord> frames;
  frames.reserve(indices.size());
  for (std::uint32_t index : indices) {
    const std::string stem = frame_stem(index);
    FrameRecord f;
    f.index = index;
    f.rgb = read_png_rgb(dir / (stem + ".color.png"));
    if (format == SequenceFormat::seven_scenes_like) {
      const fs::path p = dir / (stem + ".depth.png");
      if (!fs::exists(p)) throw FormatError("missing depth file " + p.string());
      f.depth = depth_from_millimetres(read_png_gray16(p));
    } else {
      const fs::path p = dir / (stem + ".depth.bin");
      if (!fs::exists(p)) throw FormatError("missing depth file " + p.string());
      f.depth = load_depth_bin(p);
    }
    if (f.depth.width() != f.rgb.width() || f.depth.height() != f.rgb.height()) {
      throw FormatError(stem + ": colour and depth sizes differ");
    }
    f.pose = load_pose(dir / (stem + ".pose.txt"));

    const fs::path override_k = dir / (stem + ".intrinsics.txt");
    if (fs::exists(override_k)) {
      f.intrinsics = load_intrinsics(override_k);
    } else if (sequence_k) {
      f.intrinsics = *sequence_k;
    } else {
      throw FormatError(dir.string() + ": no intrinsics.txt and no per-frame override for " + stem);
    }
    if (f.intrinsics.width != f.rgb.width() || f.intrinsics.height != f.rgb.height()) {
      throw FormatError(stem + ": intrinsics image size does not match the frame");
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

void save_sequence(const std::vector<FrameRecord>& frames, const fs::path& dir,
                   SequenceFormat format) {
  fs::create_directories(dir);
  if (!frames.empty()) save_intrinsics(frames.front().intrinsics, dir / "intrinsics.txt");
  for (const FrameRecord& f : frames) {
    const std::string stem = frame_stem(f.index);
    write_png_rgb(f.rgb, dir / (stem + ".color.png"));
    if (format == SequenceFormat::seven_scenes_like) {
      write_png_gray16(depth_to_millimetres(f.depth), dir / (stem + ".depth.png"));
    } else {
      save_depth_bin(f.depth, dir / (stem + ".depth.bin"));
    }
    save_pose(f.pose, dir / (stem + ".pose.txt"));
    if (!(f.intrinsics == frames.front().intrinsics)) {
      save_intrinsics(f.intrinsics, dir / (stem + ".intrinsics.txt"));
    }
  }
}

fs::path prediction_path(const fs::path& dir, std::uint32_t frame_index) {
  return dir / (frame_stem(frame_index) + ".pred.bin");
}

void save_predictions(const PredictionFile& file, const fs::path& path) {
  const PredictionGrid& g = file.grid;
  ByteWriter out;
  out.magic("SCPR");
  out.u32(kPredictionFileVersion);
  out.u32(file.frame_index);
  out.u32(static_cast<std::uint32_t>(g.width));
  out.u32(static_cast<std::uint32_t>(g.height));
  for (const Eigen::Vector3f& p : g.points) {
    out.f32(p.x());
    out.f32(p.y());
    out.f32(p.z());
  }
  const std::size_t cells = g.cell_count();
  for (std::size_t byte = 0; byte < (cells + 7) / 8; ++byte) {
    std::uint8_t bits = 0;
    for (std::size_t b = 0; b < 8 && byte * 8 + b < cells; ++b) {
      if (g.valid[byte * 8 + b]) bits |= static_cast<std::uint8_t>(1u << b);
    }
    out.u8(bits);
  }
  out.write_to(path);
}

PredictionFile load_predictions(const fs::path& path) {
  ByteReader in(path);
  in.expect_magic("SCPR");
  const std::uint32_t version = in.u32();
  if (version != kPredictionFileVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  }
  PredictionFile file;
  file.frame_index = in.u32();
  const std::uint32_t w = in.u32();
  const std::uint32_t h = in.u32();
  const std::size_t cells = static_cast<std::size_t>(w) * h;
  if (w > (1u << 16) || h > (1u << 16)) throw FormatError(path.string() + ": implausible grid size");
  in.need(cells * 12 + (cells + 7) / 8);
  file.grid = PredictionGrid(static_cast<int>(w), static_cast<int>(h));
  for (Eigen::Vector3f& p : file.grid.points) {
    p.x() = in.f32();
    p.y() = in.f32();
    p.z() = in.f32();
  }
  for (std::size_t byte = 0; byte < (cells + 7) / 8; ++byte) {
    const std::uint8_t bits = in.u8();
    for (std::size_t b = 0; b < 8 && byte * 8 + b < cells; ++b) {
      file.grid.valid[byte * 8 + b] = (bits >> b) & 1u;
    }
  }
  if (in.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  return file;
}

void save_scene_model(const ScenePointModel& model, const fs::path& path) {
  ByteWriter out;
  out.magic("SCPM");
  out.u32(1);
  out.u64(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Eigen::Vector3f& p = model.positions()[i];
    out.f32(p.x());
    out.f32(p.y());
    out.f32(p.z());
    for (std::uint8_t c : model.colours()[i]) out.u8(c);
  }
  out.write_to(path);
}

ScenePointModel load_scene_model(const fs::path& path) {
  ByteReader in(path);
  in.expect_magic("SCPM");
  if (in.u32() != 1) throw FormatError(path.string() + ": unsupported scene model version");
  const std::uint64_t count = in.u64();
  if (count > in.remaining() / 15) throw FormatError(path.string() + ": truncated point data");
  std::vector<Eigen::Vector3f> positions(count);
  std::vector<Rgb8> colours(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    positions[i].x() = in.f32();
    positions[i].y() = in.f32();
    positions[i].z() = in.f32();
    for (auto& c : colours[i]) c = in.u8();
  }
  if (in.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  return {std::move(positions), std::move(colours)};
}

}  // namespace scoreloc

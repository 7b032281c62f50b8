#include "scoreloc/relocaliser.hpp"

#include <chrono>
#include <sstream>

#include "byte_stream.hpp"
#include "scoreloc/errors.hpp"
#include "scoreloc/pose_backend.hpp"
#include "scoreloc/refinement.hpp"

namespace scoreloc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

constexpr std::uint64_t kTestStreamSalt = 0x9e3779b97f4a7c15ULL;

}  // namespace

RelocaliserState::RelocaliserState(RelocaliserConfig config)
    : config_((config.validate(), std::move(config))),
      table_(config_.reservoir_count, config_.seed + 1),
      reservoirs_(static_cast<std::size_t>(config_.reservoir_count),
                  Reservoir(config_.reservoir_capacity)),
      builder_(config_.model_voxel_size),
      rng_(config_.seed) {}

void RelocaliserState::set_test_settings(const RelocaliserConfig& config) {
  config.validate();
  config_.ransac = config.ransac;
  config_.icp = config.icp;
  config_.icp_enabled = config.icp_enabled;
  config_.ranking_enabled = config.ranking_enabled;
}

void RelocaliserState::train_online(std::span<const FrameRecord> frames,
                                    const Predictor& predictor) {
  bool model_changed = false;
  for (const FrameRecord& frame : frames) {
    const PredictionGrid pred = predictor.predict(frame);
    const ReservoirIndexImage index = adapt(pred, table_, config_.grid);
    for (int y = 0; y < index.height; ++y) {
      for (int x = 0; x < index.width; ++x) {
        const auto r = index.at(x, y);
        if (!r) continue;
        const Eigen::Vector2i u = PredictionGrid::source_pixel(x, y);
        if (!is_valid_depth(frame.depth(u.x(), u.y()))) continue;
        reservoirs_[static_cast<std::size_t>(*r)].add_point(
            {back_project(u, frame.depth, frame.intrinsics, frame.pose),
             rgb_to_unit(frame.rgb(u.x(), u.y()))},
            rng_);
      }
    }

    if (train_poses_.size() % config_.model_frame_stride == 0) {
      for (int y = 0; y < frame.depth.height(); ++y) {
        for (int x = 0; x < frame.depth.width(); ++x) {
          if (!is_valid_depth(frame.depth(x, y))) continue;
          builder_.add(back_project({x, y}, frame.depth, frame.intrinsics, frame.pose),
                       rgb_to_unit(frame.rgb(x, y)));
        }
      }
      model_changed = true;
    }
    train_poses_.push_back(frame.pose);
  }

  for (auto& r : reservoirs_) {
    if (r.inserts_since_recluster() > 0) r.recluster(config_.clusterer);
  }
  if (model_changed) model_ = builder_.build();
}

void RelocaliserState::save(const std::filesystem::path& path) const {
  detail::ByteWriter out;
  out.magic("SCRS");
  out.u32(1);
  HarnessConfig hc;
  hc.relocaliser = config_;
  out.str(format_config(hc));

  out.u64(table_.seed());
  out.u32(static_cast<std::uint32_t>(table_.assigned_reservoirs()));
  out.u64(table_.sharing_draws());
  std::vector<std::pair<std::int64_t, std::int32_t>> entries(table_.entries().begin(),
                                                             table_.entries().end());
  std::sort(entries.begin(), entries.end());
  out.u64(entries.size());
  for (const auto& [cell, r] : entries) {
    out.u64(static_cast<std::uint64_t>(cell));
    out.u32(static_cast<std::uint32_t>(r));
  }

  for (std::int32_t i = 0; i < table_.assigned_reservoirs(); ++i) {
    const Reservoir& r = reservoirs_[static_cast<std::size_t>(i)];
    out.u64(r.seen_count());
    out.u64(r.size());
    for (const auto& p : r.points()) {
      for (int k = 0; k < 3; ++k) out.f64(p.position[k]);
      for (int k = 0; k < 3; ++k) out.f64(p.colour[k]);
    }
  }

  out.u64(model_.size());
  for (std::size_t i = 0; i < model_.size(); ++i) {
    for (int k = 0; k < 3; ++k) out.f32(model_.positions()[i][k]);
    for (std::uint8_t c : model_.colours()[i]) out.u8(c);
  }

  out.u64(train_poses_.size());
  for (const auto& p : train_poses_) {
    const Eigen::Matrix4d m = p.matrix();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) out.f64(m(r, c));
  }

  std::ostringstream rng_text;
  rng_text << rng_;
  out.str(rng_text.str());
  out.write_to(path);
}

RelocaliserState RelocaliserState::Load(const std::filesystem::path& path) {
  detail::ByteReader in(path);
  in.expect_magic("SCRS");
  if (in.u32() != 1) throw FormatError(path.string() + ": unsupported state version");
  RelocaliserState s(parse_config(in.str()).relocaliser);

  const std::uint64_t seed = in.u64();
  const auto assigned = static_cast<std::int32_t>(in.u32());
  const std::uint64_t draws = in.u64();
  const std::uint64_t n_entries = in.u64();
  if (n_entries > in.remaining() / 12 || assigned > s.config_.reservoir_count) {
    throw FormatError(path.string() + ": corrupt lookup table");
  }
  std::vector<std::pair<std::int64_t, std::int32_t>> entries(n_entries);
  for (auto& [cell, r] : entries) {
    cell = static_cast<std::int64_t>(in.u64());
    r = static_cast<std::int32_t>(in.u32());
  }
  s.table_ = ReservoirLookupTable::Restore(s.config_.reservoir_count, seed, std::move(entries),
                                           assigned, draws);

  for (std::int32_t i = 0; i < assigned; ++i) {
    const std::uint64_t seen = in.u64();
    const std::uint64_t count = in.u64();
    if (count > in.remaining() / 48) throw FormatError(path.string() + ": truncated reservoir");
    std::vector<ReservoirPoint> points(count);
    for (auto& p : points) {
      for (int k = 0; k < 3; ++k) p.position[k] = in.f64();
      for (int k = 0; k < 3; ++k) p.colour[k] = in.f64();
    }
    Reservoir& r = s.reservoirs_[static_cast<std::size_t>(i)];
    r = Reservoir::Restore(s.config_.reservoir_capacity, std::move(points), seen);
    if (r.size() > 0) r.recluster(s.config_.clusterer);
  }

  const std::uint64_t model_size = in.u64();
  if (model_size > in.remaining() / 15) throw FormatError(path.string() + ": truncated model");
  std::vector<Eigen::Vector3f> positions(model_size);
  std::vector<Rgb8> colours(model_size);
  for (std::uint64_t i = 0; i < model_size; ++i) {
    for (int k = 0; k < 3; ++k) positions[i][k] = in.f32();
    for (auto& c : colours[i]) c = in.u8();
  }
  // Further training continues from the saved model points, each counted once.
  for (std::uint64_t i = 0; i < model_size; ++i) {
    s.builder_.add(positions[i].cast<double>(), rgb_to_unit(colours[i]));
  }
  s.model_ = ScenePointModel(std::move(positions), std::move(colours));

  const std::uint64_t n_poses = in.u64();
  if (n_poses > in.remaining() / 96) throw FormatError(path.string() + ": truncated poses");
  for (std::uint64_t i = 0; i < n_poses; ++i) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = in.f64();
    s.train_poses_.push_back(RigidPosed::FromMatrix(m));
  }

  std::istringstream rng_text(in.str());
  rng_text >> s.rng_;
  if (!rng_text) throw FormatError(path.string() + ": corrupt RNG state");
  if (in.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  return s;
}

RelocaliseResult relocalise(const RelocaliserState& state, const FrameRecord& frame,
                            const Predictor& predictor, const RelocaliseOptions& options) {
  const RelocaliserConfig& cfg = state.config();
  RelocaliseResult result;
  StageTimings& t = result.timings;
  const auto start = Clock::now();
  std::mt19937_64 rng(frame_stream_seed(cfg.seed ^ kTestStreamSalt, frame.index));

  auto stage = Clock::now();
  const PredictionGrid pred = predictor.predict(frame);
  CorrespondenceSet cs;
  if (options.raw) {
    cs = build_raw_correspondences(pred, frame.depth, frame.rgb, frame.intrinsics);
  } else {
    const ReservoirIndexImage index = adapt_lookup(pred, state.table(), cfg.grid);
    cs = build_correspondences(index, frame.depth, frame.rgb, frame.intrinsics, state.reservoirs());
  }
  result.correspondences = cs.size();
  GenerationResult generated;
  try {
    generated = generate_hypotheses(cs.view(), cfg.ransac, rng);
  } catch (const NoHypotheses& e) {
    throw RelocalisationFailed(std::string("frame ") + std::to_string(frame.index) + ": " + e.what());
  }
  result.generation_attempts = generated.attempts;
  t[0] = elapsed_ms(stage);

  stage = Clock::now();
  auto culled = score_and_cull(std::move(generated.hypotheses), cs.view(), cfg.ransac, rng);
  t[1] = elapsed_ms(stage);

  RansacTimings rt;
  const auto finalists = preemptive_ransac(std::move(culled), cs.view(), cfg.ransac, rng, &rt);
  t[2] = rt.inlier_sampling_ms;
  t[3] = rt.optimisation_ms;

  stage = Clock::now();
  if (cfg.ranking_enabled) {
    std::vector<RigidPosed> candidates;
    for (const auto& h : finalists) candidates.push_back(h.pose);
    RankingOptions ro;
    ro.icp = cfg.icp_enabled;
    ro.icp_params = cfg.icp;
    try {
      result.pose = rank_hypotheses(candidates, frame.depth, frame.intrinsics,
                                    state.scene_model(), ro).pose;
    } catch (const AllFailed& e) {
      throw RelocalisationFailed(std::string("frame ") + std::to_string(frame.index) + ": " + e.what());
    }
  } else {
    result.pose = finalists.front().pose;
    if (cfg.icp_enabled && !state.scene_model().empty()) {
      try {
        result.pose = icp_refine(result.pose, frame.depth, frame.intrinsics, state.scene_model(),
                                 cfg.icp).pose;
      } catch (const EmptyOverlap&) {
      }
    }
  }
  t[4] = elapsed_ms(stage);
  t[5] = elapsed_ms(start);
  return result;
}

}  // namespace scoreloc

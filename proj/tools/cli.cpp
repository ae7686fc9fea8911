// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "voxfuse/error.hpp"
#include "voxfuse/estimate.hpp"
#include "voxfuse/io.hpp"
#include "voxfuse/losses.hpp"
#include "voxfuse/metrics.hpp"
#include "voxfuse/pipeline.hpp"
#include "voxfuse/synth.hpp"

namespace voxfuse::cli {

namespace {

namespace fs = std::filesystem;
using io::json;

fs::path output_root() {
  const char* env = std::getenv("VOXFUSE_OUT");
  return env && *env ? fs::path(env) : fs::path("voxfuse_out");
}

// Calls f(i) for i in [0, n) on `jobs` threads. The first failure by index is rethrown.
template <typename F>
void parallel_for(int n, int jobs, F&& f) {
  jobs = std::clamp(jobs, 1, std::max(1, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct Run {
  std::string name;
  std::vector<std::string> args;
};

void write_manifest(const fs::path& path, const Run& run, std::optional<std::uint64_t> seed, const json& config) {
  io::write_json(path, {{"tool", "voxfuse"},
                        {"version", kVersion},
                        {"command", run.name},
                        {"args", run.args},
                        {"seed", seed ? json(*seed) : json(nullptr)},
                        {"config", config}});
}

fs::path manifest_for_file(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

fs::path cloud_path(const fs::path& dir, int frame, const std::string& format) {
  return dir / (io::frame_dir_name(frame) + "." + format);
}

fs::path find_cloud(const fs::path& dir, int frame) {
  for (const char* ext : {"ply", "f32"}) {
    const fs::path p = cloud_path(dir, frame, ext);
    if (fs::exists(p)) return p;
  }
  throw io::IoError("no cloud for frame " + std::to_string(frame) + " in " + dir.string());
}

struct GroundTruth {
  std::map<std::pair<int, int>, Pose> poses;  // (frame, person) -> pose
  std::vector<int> frames;
};

GroundTruth read_ground_truth(const io::Bundle& bundle) {
  GroundTruth gt;
  for (const fs::path& dir : bundle.frames) {
    const json doc = io::read_json(dir / "poses.json");
    const int f = doc.at("frame").get<int>();
    gt.frames.push_back(f);
    for (const auto& p : doc.at("persons")) gt.poses[{f, p.at("id").get<int>()}] = io::pose_from_json(p);
  }
  return gt;
}

const Pose& truth_of(const GroundTruth& gt, const io::EstimateRecord& r) {
  auto it = gt.poses.find({r.frame, r.person_id});
  if (it == gt.poses.end())
    throw io::IoError("no ground truth for frame " + std::to_string(r.frame) + " person " + std::to_string(r.person_id));
  return it->second;
}

const SceneFrame& frame_for(std::map<int, SceneFrame>& cache, const io::Bundle& bundle, int index) {
  auto it = cache.find(index);
  if (it != cache.end()) return it->second;
  return cache.emplace(index, io::read_frame(bundle.root / io::frame_dir_name(index), bundle.config)).first->second;
}

std::size_t person_slot(const SceneFrame& frame, int person_id) {
  for (std::size_t i = 0; i < frame.persons.size(); ++i)
    if (frame.persons[i].id == person_id) return i;
  throw io::IoError("frame " + std::to_string(frame.index) + " has no person " + std::to_string(person_id));
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json fusion_json(const FusionParams& p) {
  return {{"side", p.side},         {"resolution", p.resolution}, {"dilation", p.dilation},
          {"gating", p.gating},     {"epsilon", p.epsilon},       {"sharpness", p.sharpness}};
}

void add_fusion_flags(CLI::App* cmd, FusionParams& p) {
  cmd->add_option("--side", p.side, "Grid side length in meters");
  cmd->add_option("--resolution", p.resolution, "Voxels per axis");
  cmd->add_option("--dilation", p.dilation, "Occupancy dilation radius in voxels");
  cmd->add_option("--gating", p.gating, "Occupancy gating strength in [0, 1]");
  cmd->add_option("--sharpness", p.sharpness, "Exponent applied to back-projected channels");
}

// ---------------------------------------------------------------------------

struct SynthOpts {
  std::string preset = "panoptic";
  int frames = 10;
  std::optional<int> persons;
  std::uint64_t seed = 0;
  std::optional<double> sigma, jitter, dropout, false_peak;
  std::string out;
  int jobs = 1;
};

int run_synth(const SynthOpts& o, const Run& run) {
  SceneConfig cfg;
  if (o.preset == "panoptic") {
    cfg = panoptic_preset();
  } else if (o.preset == "basketball") {
    cfg = basketball_preset();
  } else {
    std::cerr << "unknown preset " << o.preset << "\n";
    return 1;
  }
  cfg.seed = o.seed;
  cfg.duration = o.frames / cfg.frame_rate;
  if (o.persons) cfg.persons = *o.persons;
  if (o.sigma) cfg.heatmap_sigma = *o.sigma;
  if (o.jitter) cfg.noise.jitter_sigma = *o.jitter;
  if (o.dropout) cfg.noise.dropout = *o.dropout;
  if (o.false_peak) cfg.noise.false_peak = *o.false_peak;
  cfg.validate();

  const fs::path out = o.out.empty() ? output_root() / "synth" : fs::path(o.out);
  fs::create_directories(out);
  const json scene = io::scene_to_json(cfg);
  const json calib = io::calibration_to_json(cfg.sensors);
  io::write_json(out / "scene.json", scene);
  io::write_json(out / "calibration.json", calib);

  const auto motion = simulate_motion(cfg);
  parallel_for(static_cast<int>(motion.size()), o.jobs, [&](int i) {
    const SceneFrame frame = render_frame(cfg, i, motion[i]);
    io::write_frame(out / io::frame_dir_name(i), frame, cfg);
  });
  write_manifest(out / "manifest.json", run, cfg.seed, {{"scene", scene}, {"calibration", calib}});
  std::cerr << "wrote " << motion.size() << " frames to " << out.string() << "\n";
  return 0;
}

struct ScanOpts {
  std::string bundle;
  std::string format = "ply";
  std::string out;
  int jobs = 1;
};

int run_scan(const ScanOpts& o, const Run& run) {
  if (o.format != "ply" && o.format != "f32") {
    std::cerr << "format must be ply or f32\n";
    return 1;
  }
  const io::Bundle b = io::Bundle::open(o.bundle);
  const fs::path out = o.out.empty() ? b.root / "scan" : fs::path(o.out);
  fs::create_directories(out);
  std::vector<json> stats(b.frames.size());
  parallel_for(static_cast<int>(b.frames.size()), o.jobs, [&](int i) {
    const SceneFrame frame = io::read_frame(b.frames[i], b.config);
    PointCloud cloud;
    int oob = 0, miss = 0;
    for (std::size_t s = 0; s < b.config.sensors.size(); ++s) {
      const Sensor& sensor = b.config.sensors[s];
      if (!sensor.lidar) continue;
      const ScanResult r = scan(frame.depth[s], sensor.camera, frame_pattern(*sensor.lidar, frame.index),
                                static_cast<int>(s));
      cloud.append(r.cloud);
      oob += r.out_of_bounds;
      miss += r.no_hit;
    }
    const fs::path path = cloud_path(out, frame.index, o.format);
    if (o.format == "ply") {
      io::write_cloud_ply(path, cloud);
    } else {
      io::write_cloud_f32(path, cloud);
    }
    stats[i] = {{"frame", frame.index}, {"points", cloud.size()}, {"out_of_bounds", oob}, {"no_hit", miss}};
  });
  write_manifest(out / "manifest.json", run, b.config.seed,
                 {{"bundle", b.root.string()}, {"format", o.format}, {"frames", stats}});
  return 0;
}

struct EstimateOpts {
  std::string bundle;
  std::string clouds;
  std::string out;
  std::string volumes;
  double crop_pad = 0.3;
  FusionParams fusion;
  int jobs = 1;
};

int run_estimate(const EstimateOpts& o, const Run& run) {
  const io::Bundle b = io::Bundle::open(o.bundle);
  const fs::path clouds = o.clouds.empty() ? b.root / "scan" : fs::path(o.clouds);
  const fs::path out = o.out.empty() ? b.root / "estimates.json" : fs::path(o.out);
  if (!o.volumes.empty()) fs::create_directories(o.volumes);
  std::vector<std::vector<io::EstimateRecord>> per_frame(b.frames.size());
  std::mutex log;
  parallel_for(static_cast<int>(b.frames.size()), o.jobs, [&](int i) {
    const SceneFrame frame = io::read_frame(b.frames[i], b.config);
    const PointCloud cloud = io::read_cloud(find_cloud(clouds, frame.index));
    for (std::size_t p = 0; p < frame.persons.size(); ++p) {
      const auto est = estimate_person(b.config, frame, cloud, p, o.fusion, o.crop_pad);
      if (!est) {
        std::lock_guard lock(log);
        std::cerr << "frame " << frame.index << " person " << frame.persons[p].id << ": no cloud and no triangulation\n";
        continue;
      }
      per_frame[i].push_back({frame.index, est->person_id, est->pose, est->uncertainty});
      if (!o.volumes.empty())
        io::write_volume(fs::path(o.volumes) /
                             (io::frame_dir_name(frame.index) + "_person_" + std::to_string(est->person_id) + ".f32"),
                         *est->heatmap);
    }
  });
  std::vector<io::EstimateRecord> all;
  for (auto& f : per_frame) all.insert(all.end(), f.begin(), f.end());
  io::write_json(out, io::estimates_to_json(all));
  write_manifest(manifest_for_file(out), run, b.config.seed,
                 {{"bundle", b.root.string()}, {"clouds", clouds.string()}, {"crop_pad", o.crop_pad},
                  {"fusion", fusion_json(o.fusion)}});
  return 0;
}

struct TriangulateOpts {
  std::string bundle;
  std::string out;
  double min_confidence = 0.1;
  int jobs = 1;
};

int run_triangulate(const TriangulateOpts& o, const Run& run) {
  const io::Bundle b = io::Bundle::open(o.bundle);
  const fs::path out = o.out.empty() ? b.root / "triangulated.json" : fs::path(o.out);
  const auto cams = cameras_of(b.config);
  std::vector<std::vector<io::EstimateRecord>> per_frame(b.frames.size());
  parallel_for(static_cast<int>(b.frames.size()), o.jobs, [&](int i) {
    const SceneFrame frame = io::read_frame(b.frames[i], b.config);
    for (std::size_t p = 0; p < frame.persons.size(); ++p) {
      const Pose pose = dlt_triangulate(person_peaks(frame, p, o.min_confidence), cams);
      per_frame[i].push_back({frame.index, frame.persons[p].id, pose, std::nullopt});
    }
  });
  std::vector<io::EstimateRecord> all;
  for (auto& f : per_frame) all.insert(all.end(), f.begin(), f.end());
  io::write_json(out, io::estimates_to_json(all));
  write_manifest(manifest_for_file(out), run, b.config.seed,
                 {{"bundle", b.root.string()}, {"min_confidence", o.min_confidence}});
  return 0;
}

struct FilterOpts {
  std::string in;
  std::string out;
  double lambda = 6.0;
};

int run_filter(const FilterOpts& o, const Run& run) {
  const auto records = io::estimates_from_json(io::read_json(o.in));
  std::vector<PersonEstimate> gate;
  for (std::size_t i = 0; i < records.size(); ++i) {
    PersonEstimate e;
    e.person_id = static_cast<int>(i);
    e.uncertainty = records[i].uncertainty.value_or(std::numeric_limits<double>::infinity());
    gate.push_back(std::move(e));
  }
  std::vector<io::EstimateRecord> kept;
  for (const PersonEstimate& e : filter_pseudo_labels(gate, o.lambda)) kept.push_back(records[e.person_id]);
  io::write_json(o.out, io::estimates_to_json(kept));
  write_manifest(manifest_for_file(o.out), run, std::nullopt,
                 {{"in", o.in}, {"lambda", o.lambda}, {"kept", kept.size()}, {"total", records.size()}});
  std::cerr << "kept " << kept.size() << " of " << records.size() << "\n";
  return 0;
}

struct RefineOpts {
  std::string bundle;
  std::string in;
  std::string out;
  RefineParams params;
  int jobs = 1;
};

int run_refine(const RefineOpts& o, const Run& run) {
  const io::Bundle b = io::Bundle::open(o.bundle);
  auto records = io::estimates_from_json(io::read_json(o.in));
  const auto cams = cameras_of(b.config);
  std::map<int, std::vector<std::size_t>> by_frame;
  for (std::size_t i = 0; i < records.size(); ++i) by_frame[records[i].frame].push_back(i);
  std::vector<std::pair<int, std::vector<std::size_t>>> groups(by_frame.begin(), by_frame.end());
  std::vector<json> stats(records.size());
  parallel_for(static_cast<int>(groups.size()), o.jobs, [&](int g) {
    const SceneFrame frame = io::read_frame(b.root / io::frame_dir_name(groups[g].first), b.config);
    for (std::size_t i : groups[g].second) {
      const auto peaks = person_peaks(frame, person_slot(frame, records[i].person_id));
      const RefineResult r = refine_pose(records[i].pose, peaks, cams, o.params);
      records[i].pose = r.pose;
      stats[i] = {{"frame", records[i].frame},           {"person_id", records[i].person_id},
                  {"initial_objective", r.initial_objective}, {"objective", r.objective},
                  {"iterations", r.iterations},         {"underconstrained", r.underconstrained}};
    }
  });
  io::write_json(o.out, io::estimates_to_json(records));
  write_manifest(manifest_for_file(o.out), run, b.config.seed,
                 {{"bundle", b.root.string()},
                  {"in", o.in},
                  {"w_2d", o.params.w_2d},
                  {"w_prior", o.params.w_prior},
                  {"iterations", o.params.iterations},
                  {"initial_step", o.params.initial_step},
                  {"shrink", o.params.shrink},
                  {"max_backtracks", o.params.max_backtracks},
                  {"runs", stats}});
  return 0;
}

struct LossOpts {
  std::string bundle;
  std::string in;
  std::string pseudo3d;
  std::string out;
  LossWeights weights;
  std::string mode = "corrected";
};

int run_loss(const LossOpts& o, const Run& run) {
  if (o.mode != "corrected" && o.mode != "literal") {
    std::cerr << "mode must be corrected or literal\n";
    return 1;
  }
  const AngleMode mode = o.mode == "literal" ? AngleMode::Literal : AngleMode::Corrected;
  o.weights.validate();
  const io::Bundle b = io::Bundle::open(o.bundle);
  const auto records = io::estimates_from_json(io::read_json(o.in));
  std::map<std::pair<int, int>, Pose> pseudo;
  if (!o.pseudo3d.empty())
    for (const auto& r : io::estimates_from_json(io::read_json(o.pseudo3d))) pseudo[{r.frame, r.person_id}] = r.pose;
  const auto cams = cameras_of(b.config);
  std::map<int, SceneFrame> cache;
  json report = json::array();
  for (const auto& r : records) {
    const SceneFrame& frame = frame_for(cache, b, r.frame);
    const auto peaks = person_peaks(frame, person_slot(frame, r.person_id));
    std::optional<Pose> p3;
    if (auto it = pseudo.find({r.frame, r.person_id}); it != pseudo.end()) p3 = it->second;
    const double u = r.uncertainty.value_or(std::numeric_limits<double>::infinity());
    const UnsupReport rep = l_unsup(r.pose, peaks, cams, p3, u, o.weights, default_bone_spec(), {}, mode);
    report.push_back({{"frame", r.frame},
                      {"person_id", r.person_id},
                      {"l_2d", rep.l_2d},
                      {"l_3d", rep.l_3d ? json(*rep.l_3d) : json(nullptr)},
                      {"l_prior", {{"length", rep.prior.length}, {"symm", rep.prior.symm}, {"angle", rep.prior.angle}}},
                      {"l_unsup", rep.l_unsup},
                      {"indicator_active", rep.indicator_active}});
  }
  io::write_json(o.out, report);
  write_manifest(manifest_for_file(o.out), run, b.config.seed,
                 {{"bundle", b.root.string()},
                  {"in", o.in},
                  {"pseudo3d", o.pseudo3d},
                  {"weights", {{"w_2d", o.weights.w_2d}, {"w_3d", o.weights.w_3d}, {"w_prior", o.weights.w_prior},
                               {"lambda", o.weights.lambda}}},
                  {"mode", o.mode}});
  return 0;
}

struct EvalPoseOpts {
  std::string bundle;
  std::string in;
  std::string csv;
  std::string summary;
};

int run_eval_pose(const EvalPoseOpts& o, const Run& run) {
  const io::Bundle b = io::Bundle::open(o.bundle);
  const GroundTruth gt = read_ground_truth(b);
  const auto records = io::estimates_from_json(io::read_json(o.in));
  std::ostringstream csv;
  csv << "frame,person,mpjpe_mm,pa_mpjpe_mm\n";
  double sum = 0, sum_pa = 0, sum_500 = 0;
  int n = 0, n_pa = 0;
  for (const auto& r : records) {
    const Pose& truth = truth_of(gt, r);
    const double e = mpjpe(r.pose, truth);
    double pa = std::numeric_limits<double>::quiet_NaN();
    try {
      pa = pa_mpjpe(r.pose, truth);
      sum_pa += pa;
      ++n_pa;
    } catch (const Error& err) {
      if (err.code() != Errc::DegenerateConfiguration) throw;
    }
    sum += e;
    sum_500 += mpjpe(r.pose, truth, 500.0);
    ++n;
    csv << r.frame << "," << r.person_id << "," << fmt(e) << "," << fmt(pa) << "\n";
  }
  io::write_text(o.csv, csv.str());
  const json summary = {{"count", n},
                        {"mean_mpjpe_mm", n ? json(sum / n) : json(nullptr)},
                        {"mean_mpjpe500_mm", n ? json(sum_500 / n) : json(nullptr)},
                        {"mean_pa_mpjpe_mm", n_pa ? json(sum_pa / n_pa) : json(nullptr)}};
  io::write_json(o.summary, summary);
  write_manifest(manifest_for_file(o.summary), run, b.config.seed, {{"bundle", b.root.string()}, {"in", o.in}});
  return 0;
}

struct EvalDetOpts {
  std::string bundle;
  std::string in;
  std::string out;
  std::vector<double> thresholds{0.5, 0.7};
  bool constant_box = false;
  double pad = 0.1;
};

int run_eval_det(const EvalDetOpts& o, const Run& run) {
  const io::Bundle b = io::Bundle::open(o.bundle);
  const GroundTruth gt = read_ground_truth(b);
  const auto records = io::estimates_from_json(io::read_json(o.in));
  auto box = [&](const Pose& p) { return o.constant_box ? constant_box_from_pose(p) : box_from_pose(p, o.pad); };
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < gt.frames.size(); ++i) slot[gt.frames[i]] = i;
  std::vector<std::vector<Box3D>> dets(gt.frames.size()), gts(gt.frames.size());
  for (const auto& [key, pose] : gt.poses) gts[slot.at(key.first)].push_back(box(pose));
  for (const auto& r : records) {
    auto it = slot.find(r.frame);
    if (it == slot.end()) throw io::IoError("estimate for unknown frame " + std::to_string(r.frame));
    Box3D d = box(r.pose);
    // Lower uncertainty ranks first; estimators without a volume share one score.
    d.score = r.uncertainty ? -*r.uncertainty : 0.0;
    dets[it->second].push_back(d);
  }
  json ap = json::object();
  for (double t : o.thresholds) ap["AP" + std::to_string(std::lround(100.0 * t))] = average_precision(dets, gts, t);
  const json report = {{"interpolation", "all-point"},
                       {"box", o.constant_box ? "constant 0.8x0.8x1.9" : "joint box padded " + fmt(o.pad)},
                       {"detections", records.size()},
                       {"ground_truth", gt.poses.size()},
                       {"ap", ap}};
  io::write_json(o.out, report);
  write_manifest(manifest_for_file(o.out), run, b.config.seed,
                 {{"bundle", b.root.string()}, {"in", o.in}, {"thresholds", o.thresholds}});
  return 0;
}

struct StudyOpts {
  std::string preset = "panoptic";
  int persons = 200;
  std::uint64_t seed = 0;
  double jitter = 8.0;
  double dropout = 0.5;
  int bins = 26;
  std::string out;
  std::string samples;
  FusionParams fusion;
  int jobs = 1;
};

int run_entropy_study(StudyOpts o, const Run& run) {
  SceneConfig cfg = o.preset == "basketball" ? basketball_preset() : panoptic_preset();
  if (o.preset != "panoptic" && o.preset != "basketball") {
    std::cerr << "unknown preset " << o.preset << "\n";
    return 1;
  }
  if (o.persons < 2 || o.bins < 1) {
    std::cerr << "need at least two persons and one bin\n";
    return 1;
  }
  cfg.persons = 1;
  cfg.seed = o.seed;
  const HeatmapNoise corrupt{o.jitter, o.dropout, 0.0};
  corrupt.validate();
  const Range rx{-cfg.extent_x / 2 + 1.5, cfg.extent_x / 2 - 1.5}, ry{-cfg.extent_y / 2 + 1.5, cfg.extent_y / 2 - 1.5};

  struct Sample {
    double u[2] = {0, 0};
    double e[2] = {0, 0};
  };
  std::vector<Sample> samples(o.persons);
  parallel_for(o.persons, o.jobs, [&](int i) {
    std::mt19937_64 rng(mix_seed(o.seed, static_cast<std::uint64_t>(i)));
    PoseParams pp = sample_pose_params(rng, cfg.ranges);
    pp.root = Vec3d(std::uniform_real_distribution<double>(rx.lo, rx.hi)(rng),
                    std::uniform_real_distribution<double>(ry.lo, ry.hi)(rng), 0.0);
    SceneFrame frame = render_frame(cfg, i, {pp});
    const PointCloud cloud = scan_frame(cfg, frame);
    for (int c = 0; c < 2; ++c) {
      if (c == 1) redraw_heatmaps(frame, cfg, corrupt, mix_seed(o.seed, static_cast<std::uint64_t>(i), 1));
      const auto est = estimate_person(cfg, frame, cloud, 0, o.fusion);
      if (!est) throw Error(Errc::NoViews, "person without cloud points or triangulation");
      samples[i].u[c] = est->uncertainty;
      samples[i].e[c] = mpjpe(est->pose, frame.persons[0].pose);
    }
  });

  const double top = std::log(static_cast<double>(o.fusion.resolution) * o.fusion.resolution * o.fusion.resolution);
  std::vector<int> hist[2] = {std::vector<int>(o.bins, 0), std::vector<int>(o.bins, 0)};
  std::vector<double> us, es;
  double mean[2] = {0, 0};
  std::ostringstream rows;
  rows << "person,condition,uncertainty_nats,mpjpe_mm\n";
  for (int i = 0; i < o.persons; ++i)
    for (int c = 0; c < 2; ++c) {
      const double u = samples[i].u[c];
      const int bin = std::clamp(static_cast<int>(u / top * o.bins), 0, o.bins - 1);
      ++hist[c][bin];
      mean[c] += u / o.persons;
      us.push_back(u);
      es.push_back(samples[i].e[c]);
      rows << i << "," << (c == 0 ? "clean" : "corrupted") << "," << fmt(u) << "," << fmt(samples[i].e[c]) << "\n";
    }
  std::ostringstream csv;
  csv << "bin_lo_nats,bin_hi_nats,clean,corrupted\n";
  for (int b = 0; b < o.bins; ++b)
    csv << fmt(top * b / o.bins) << "," << fmt(top * (b + 1) / o.bins) << "," << hist[0][b] << "," << hist[1][b] << "\n";

  const fs::path out = o.out.empty() ? output_root() / "entropy_hist.csv" : fs::path(o.out);
  io::write_text(out, csv.str());
  if (!o.samples.empty()) io::write_text(o.samples, rows.str());
  const double rho = spearman(us, es);
  write_manifest(manifest_for_file(out), run, o.seed,
                 {{"preset", o.preset},
                  {"persons", o.persons},
                  {"corruption", {{"jitter_sigma", o.jitter}, {"dropout", o.dropout}}},
                  {"fusion", fusion_json(o.fusion)},
                  {"mean_uncertainty_clean", mean[0]},
                  {"mean_uncertainty_corrupted", mean[1]},
                  {"spearman_uncertainty_mpjpe", rho}});
  std::cout << "mean uncertainty clean " << fmt(mean[0]) << " corrupted " << fmt(mean[1]) << " spearman " << fmt(rho)
            << "\n";
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Multi-view LiDAR-camera human pose toolkit", "voxfuse"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  int jobs = 1;
  app.add_option("--jobs", jobs, "Worker threads for frame-level work")->check(CLI::PositiveNumber);

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic frame bundle");
  synth->add_option("--preset", so.preset, "panoptic or basketball");
  synth->add_option("--frames", so.frames, "Number of frames")->check(CLI::NonNegativeNumber);
  synth->add_option("--persons", so.persons, "Override the preset person count");
  synth->add_option("--seed", so.seed, "Motion and noise seed");
  synth->add_option("--sigma", so.sigma, "Heatmap Gaussian std in pixels");
  synth->add_option("--jitter", so.jitter, "Heatmap center jitter std in pixels");
  synth->add_option("--dropout", so.dropout, "Per-channel dropout probability");
  synth->add_option("--false-peak", so.false_peak, "Per-channel spurious peak probability");
  synth->add_option("--out", so.out, "Bundle directory (default $VOXFUSE_OUT/synth)");

  ScanOpts sc;
  auto* scan_cmd = app.add_subcommand("scan", "Simulate LiDAR scans over a bundle's depth maps");
  scan_cmd->add_option("--bundle", sc.bundle)->required();
  scan_cmd->add_option("--format", sc.format, "ply or f32");
  scan_cmd->add_option("--out", sc.out, "Cloud directory (default <bundle>/scan)");

  EstimateOpts eo;
  auto* est = app.add_subcommand("estimate", "Volumetric fusion of heatmaps and point clouds");
  est->add_option("--bundle", eo.bundle)->required();
  est->add_option("--clouds", eo.clouds, "Cloud directory (default <bundle>/scan)");
  est->add_option("--out", eo.out, "Estimates JSON (default <bundle>/estimates.json)");
  est->add_option("--volumes", eo.volumes, "Also dump fused volumes into this directory");
  est->add_option("--crop-pad", eo.crop_pad, "Padding of the per-person cloud crop in meters");
  add_fusion_flags(est, eo.fusion);

  TriangulateOpts to;
  auto* tri = app.add_subcommand("triangulate", "DLT triangulation of heatmap peaks");
  tri->add_option("--bundle", to.bundle)->required();
  tri->add_option("--out", to.out, "Estimates JSON (default <bundle>/triangulated.json)");
  tri->add_option("--min-confidence", to.min_confidence, "Peak value below which a joint is unseen");

  FilterOpts fo;
  auto* filt = app.add_subcommand("filter", "Keep estimates whose uncertainty is below lambda");
  filt->add_option("--in", fo.in)->required();
  filt->add_option("--out", fo.out)->required();
  filt->add_option("--lambda", fo.lambda, "Entropy threshold in nats");

  RefineOpts ro;
  auto* ref = app.add_subcommand("refine", "Refine estimates against heatmap peaks and the human prior");
  ref->add_option("--bundle", ro.bundle)->required();
  ref->add_option("--in", ro.in)->required();
  ref->add_option("--out", ro.out)->required();
  ref->add_option("--w2d", ro.params.w_2d, "Reprojection weight");
  ref->add_option("--wprior", ro.params.w_prior, "Prior weight");
  ref->add_option("--iterations", ro.params.iterations, "Maximum descent iterations");
  ref->add_option("--step", ro.params.initial_step, "Initial trial step in meters");

  LossOpts lo;
  auto* loss = app.add_subcommand("loss", "Loss report for estimates");
  loss->add_option("--bundle", lo.bundle)->required();
  loss->add_option("--in", lo.in)->required();
  loss->add_option("--out", lo.out)->required();
  loss->add_option("--pseudo3d", lo.pseudo3d, "Estimates JSON used as 3D pseudo labels");
  loss->add_option("--w2d", lo.weights.w_2d);
  loss->add_option("--w3d", lo.weights.w_3d);
  loss->add_option("--wprior", lo.weights.w_prior);
  loss->add_option("--lambda", lo.weights.lambda, "Entropy threshold in nats");
  loss->add_option("--mode", lo.mode, "corrected or literal head/leg angle sign");

  EvalPoseOpts po;
  auto* evp = app.add_subcommand("eval-pose", "MPJPE and PA-MPJPE against bundle ground truth");
  evp->add_option("--bundle", po.bundle)->required();
  evp->add_option("--in", po.in)->required();
  evp->add_option("--csv", po.csv)->required();
  evp->add_option("--summary", po.summary)->required();

  EvalDetOpts dop;
  auto* evd = app.add_subcommand("eval-det", "3D box average precision of estimates");
  evd->add_option("--bundle", dop.bundle)->required();
  evd->add_option("--in", dop.in)->required();
  evd->add_option("--out", dop.out)->required();
  evd->add_option("--thresholds", dop.thresholds, "IoU thresholds")->delimiter(',');
  evd->add_flag("--constant-box", dop.constant_box, "Use 0.8 x 0.8 x 1.9 m boxes");
  evd->add_option("--pad", dop.pad, "Joint box padding in meters");

  StudyOpts st;
  auto* study = app.add_subcommand("entropy-study", "Uncertainty histograms for clean and corrupted heatmaps");
  study->add_option("--preset", st.preset);
  study->add_option("--persons", st.persons);
  study->add_option("--seed", st.seed);
  study->add_option("--jitter", st.jitter);
  study->add_option("--dropout", st.dropout);
  study->add_option("--bins", st.bins);
  study->add_option("--out", st.out, "Histogram CSV (default $VOXFUSE_OUT/entropy_hist.csv)");
  study->add_option("--samples", st.samples, "Per-person CSV");
  add_fusion_flags(study, st.fusion);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const Run run{cmd->get_name(), args};
  try {
    if (cmd == synth) return so.jobs = jobs, run_synth(so, run);
    if (cmd == scan_cmd) return sc.jobs = jobs, run_scan(sc, run);
    if (cmd == est) return eo.jobs = jobs, run_estimate(eo, run);
    if (cmd == tri) return to.jobs = jobs, run_triangulate(to, run);
    if (cmd == filt) return run_filter(fo, run);
    if (cmd == ref) return ro.jobs = jobs, run_refine(ro, run);
    if (cmd == loss) return run_loss(lo, run);
    if (cmd == evp) return run_eval_pose(po, run);
    if (cmd == evd) return run_eval_det(dop, run);
    if (cmd == study) return st.jobs = jobs, run_entropy_study(st, run);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace voxfuse::cli

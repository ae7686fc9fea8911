// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxfuse/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace voxfuse::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

template <typename Derived>
json flat(const Eigen::MatrixBase<Derived>& m) {
  // Row-major flattening.
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

template <int R, int C>
Eigen::Matrix<double, R, C> matrix(const json& a, const char* what) {
  if (!a.is_array() || a.size() != static_cast<std::size_t>(R * C))
    throw IoError(std::string("expected ") + std::to_string(R * C) + " numbers for " + what);
  Eigen::Matrix<double, R, C> m;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) m(r, c) = a.at(r * C + c).get<double>();
  return m;
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }
Range range_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

class Writer {
 public:
  explicit Writer(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    path_ = path;
  }
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_floats(const float* data, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
  }
  ~Writer() noexcept(false) {
    out_.close();
    if (!out_ && std::uncaught_exceptions() == 0) throw IoError("write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  template <typename T>
  T get() {
    T v;
    read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  void get_floats(float* data, std::size_t n) { read(reinterpret_cast<char*>(data), n * sizeof(float)); }

 private:
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw IoError("truncated file " + path_.string());
  }
  std::ifstream in_;
  fs::path path_;
};

}  // namespace

// ---------------------------------------------------------------------------
// JSON documents

json to_json(const Camera& camera) {
  return {{"K", flat(camera.intrinsics())},
          {"R", flat(camera.rotation())},
          {"t", flat(camera.translation())},
          {"width", camera.width()},
          {"height", camera.height()}};
}

Camera camera_from_json(const json& j) {
  try {
    return Camera(matrix<3, 3>(j.at("K"), "K"), matrix<3, 3>(j.at("R"), "R"), matrix<3, 1>(j.at("t"), "t"),
                  j.at("width").get<int>(), j.at("height").get<int>());
  } catch (const json::exception& e) {
    throw IoError(std::string("bad camera entry: ") + e.what());
  }
}

json to_json(const ScanPatternParams& p) {
  json centers = json::array();
  for (const Vec2d& c : p.centers) centers.push_back({c.x(), c.y()});
  return {{"kind", std::string(to_string(p.kind))},
          {"alpha", p.alpha},
          {"theta0", p.theta0},
          {"duration", p.duration},
          {"centers", centers},
          {"line_count", p.line_count},
          {"sample_count", p.sample_count},
          {"seed", p.seed}};
}

ScanPatternParams scan_params_from_json(const json& j) {
  try {
    ScanPatternParams p;
    p.kind = parse_scan_kind(j.value("kind", std::string("rose")));
    p.alpha = j.value("alpha", p.alpha);
    p.theta0 = j.value("theta0", p.theta0);
    p.duration = j.value("duration", p.duration);
    p.line_count = j.value("line_count", p.line_count);
    p.sample_count = j.value("sample_count", p.sample_count);
    p.seed = j.value("seed", p.seed);
    if (j.contains("centers"))
      for (const auto& c : j.at("centers")) p.centers.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
    return p;
  } catch (const json::exception& e) {
    throw IoError(std::string("bad lidar entry: ") + e.what());
  }
}

json calibration_to_json(const std::vector<Sensor>& sensors) {
  json list = json::array();
  for (const Sensor& s : sensors) {
    json e = to_json(s.camera);
    e["id"] = s.id;
    if (s.lidar) e["lidar"] = to_json(*s.lidar);
    list.push_back(e);
  }
  return {{"convention",
           "world right-handed z-up, meters; R,t map world to camera (x right, y down, z forward); "
           "matrices row-major; pixel centers at integer coordinates"},
          {"sensors", list}};
}

std::vector<Sensor> calibration_from_json(const json& j) {
  std::vector<Sensor> out;
  try {
    for (const auto& e : j.at("sensors")) {
      Sensor s{e.at("id").get<std::string>(), camera_from_json(e), std::nullopt};
      if (e.contains("lidar") && !e.at("lidar").is_null()) {
        ScanPatternParams p = scan_params_from_json(e.at("lidar"));
        p.width = s.camera.width();
        p.height = s.camera.height();
        s.lidar = p;
      }
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("bad calibration: ") + e.what());
  }
  return out;
}

json scene_to_json(const SceneConfig& c) {
  const AngleRanges& r = c.ranges;
  return {{"name", c.name},
          {"extent", {c.extent_x, c.extent_y}},
          {"persons", c.persons},
          {"seed", c.seed},
          {"frame_rate", c.frame_rate},
          {"duration", c.duration},
          {"heatmap_sigma", c.heatmap_sigma},
          {"noise", {{"jitter_sigma", c.noise.jitter_sigma}, {"dropout", c.noise.dropout}, {"false_peak", c.noise.false_peak}}},
          {"visibility_threshold", c.visibility_threshold},
          {"margin", c.margin},
          {"walk_scale", c.walk_scale},
          {"ranges",
           {{"scale", range_json(r.scale)},
            {"yaw", range_json(r.yaw)},
            {"lean", range_json(r.lean)},
            {"hip_flex", range_json(r.hip_flex)},
            {"hip_abd", range_json(r.hip_abd)},
            {"knee", range_json(r.knee)},
            {"shoulder_flex", range_json(r.shoulder_flex)},
            {"shoulder_abd", range_json(r.shoulder_abd)},
            {"elbow", range_json(r.elbow)},
            {"head_pitch", range_json(r.head_pitch)},
            {"head_yaw", range_json(r.head_yaw)}}}};
}

SceneConfig scene_from_json(const json& j, const json& calibration) {
  SceneConfig c;
  try {
    c.name = j.at("name").get<std::string>();
    c.extent_x = j.at("extent").at(0).get<double>();
    c.extent_y = j.at("extent").at(1).get<double>();
    c.persons = j.at("persons").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.frame_rate = j.at("frame_rate").get<double>();
    c.duration = j.at("duration").get<double>();
    c.heatmap_sigma = j.at("heatmap_sigma").get<double>();
    const json& n = j.at("noise");
    c.noise = {n.at("jitter_sigma").get<double>(), n.at("dropout").get<double>(), n.at("false_peak").get<double>()};
    c.visibility_threshold = j.at("visibility_threshold").get<double>();
    c.margin = j.at("margin").get<double>();
    c.walk_scale = j.at("walk_scale").get<double>();
    const json& r = j.at("ranges");
    AngleRanges& a = c.ranges;
    a.scale = range_from(r.at("scale"));
    a.yaw = range_from(r.at("yaw"));
    a.lean = range_from(r.at("lean"));
    a.hip_flex = range_from(r.at("hip_flex"));
    a.hip_abd = range_from(r.at("hip_abd"));
    a.knee = range_from(r.at("knee"));
    a.shoulder_flex = range_from(r.at("shoulder_flex"));
    a.shoulder_abd = range_from(r.at("shoulder_abd"));
    a.elbow = range_from(r.at("elbow"));
    a.head_pitch = range_from(r.at("head_pitch"));
    a.head_yaw = range_from(r.at("head_yaw"));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad scene file: ") + e.what());
  }
  c.sensors = calibration_from_json(calibration);
  return c;
}

json pose_to_json(const Pose& pose) {
  json joints = json::array(), valid = json::array();
  for (int k = 0; k < kNumJoints; ++k) {
    joints.push_back({pose.joints(0, k), pose.joints(1, k), pose.joints(2, k)});
    valid.push_back(static_cast<bool>(pose.valid[k]));
  }
  return {{"joints", joints}, {"validity", valid}};
}

Pose pose_from_json(const json& j) {
  Pose p;
  try {
    const json& joints = j.at("joints");
    if (joints.size() != static_cast<std::size_t>(kNumJoints)) throw IoError("pose needs 17 joints");
    for (int k = 0; k < kNumJoints; ++k) {
      for (int c = 0; c < 3; ++c) p.joints(c, k) = joints.at(k).at(c).get<double>();
      p.valid[k] = j.contains("validity") ? j.at("validity").at(k).get<bool>() : true;
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("bad pose: ") + e.what());
  }
  return p;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Binary payloads

void write_depth(const fs::path& path, const DepthMap& depth) {
  Writer w(path);
  w.put(static_cast<std::uint32_t>(depth.cols()));
  w.put(static_cast<std::uint32_t>(depth.rows()));
  w.put_floats(depth.data(), static_cast<std::size_t>(depth.size()));
}

DepthMap read_depth(const fs::path& path) {
  Reader r(path);
  const auto w = r.get<std::uint32_t>(), h = r.get<std::uint32_t>();
  DepthMap d(h, w);
  r.get_floats(d.data(), static_cast<std::size_t>(d.size()));
  return d;
}

void write_patch(const fs::path& path, const HeatmapPatch& p) {
  Writer w(path);
  w.put(static_cast<std::uint32_t>(p.width));
  w.put(static_cast<std::uint32_t>(p.height));
  w.put(static_cast<std::int32_t>(p.x0));
  w.put(static_cast<std::int32_t>(p.y0));
  w.put(static_cast<std::uint32_t>(p.values.cols()));
  w.put(static_cast<std::uint32_t>(p.values.rows()));
  w.put_floats(p.values.data(), static_cast<std::size_t>(p.values.size()));
}

HeatmapPatch read_patch(const fs::path& path) {
  Reader r(path);
  HeatmapPatch p;
  p.width = static_cast<int>(r.get<std::uint32_t>());
  p.height = static_cast<int>(r.get<std::uint32_t>());
  p.x0 = r.get<std::int32_t>();
  p.y0 = r.get<std::int32_t>();
  const auto cw = r.get<std::uint32_t>(), ch = r.get<std::uint32_t>();
  if (p.x0 < 0 || p.y0 < 0 || p.x0 + static_cast<long>(cw) > p.width || p.y0 + static_cast<long>(ch) > p.height)
    throw IoError("heatmap crop outside the image in " + path.string());
  p.values.resize(ch, cw);
  r.get_floats(p.values.data(), static_cast<std::size_t>(p.values.size()));
  return p;
}

void write_cloud_ply(const fs::path& path, const PointCloud& cloud) {
  std::ostringstream s;
  s << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
    << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char buf[96];
  for (const Vec3d& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", static_cast<float>(p.x()), static_cast<float>(p.y()),
                  static_cast<float>(p.z()));
    s << buf;
  }
  write_text(path, s.str());
}

void write_cloud_f32(const fs::path& path, const PointCloud& cloud) {
  Writer w(path);
  w.put(static_cast<std::uint64_t>(cloud.size()));
  for (const Vec3d& p : cloud.points) {
    const float xyz[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())};
    w.put_floats(xyz, 3);
  }
}

PointCloud read_cloud(const fs::path& path) {
  PointCloud cloud;
  if (path.extension() == ".f32") {
    Reader r(path);
    const auto n = r.get<std::uint64_t>();
    cloud.points.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      float xyz[3];
      r.get_floats(xyz, 3);
      cloud.points.emplace_back(xyz[0], xyz[1], xyz[2]);
    }
    return cloud;
  }
  if (path.extension() != ".ply") throw IoError("unknown cloud format " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t n = 0;
  bool header = true;
  while (header && std::getline(in, line)) {
    if (line.rfind("element vertex", 0) == 0) n = std::stoul(line.substr(15));
    if (line == "end_header") header = false;
  }
  if (header) throw IoError("missing PLY header in " + path.string());
  for (std::size_t i = 0; i < n; ++i) {
    double x, y, z;
    if (!(in >> x >> y >> z)) throw IoError("truncated PLY " + path.string());
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

void write_volume(const fs::path& path, const VoxelHeatmap& vh) {
  const VoxelGridSpec& s = vh.spec();
  Writer w(path);
  w.put(static_cast<std::uint32_t>(vh.channels()));
  for (int a = 0; a < 3; ++a) w.put(static_cast<std::uint32_t>(s.resolution[a]));
  for (int a = 0; a < 3; ++a) w.put(s.center[a]);
  w.put(s.side);
  const Eigen::MatrixXf data = vh.data().cast<float>();  // column-major: channel after channel
  w.put_floats(data.data(), static_cast<std::size_t>(data.size()));
}

// ---------------------------------------------------------------------------
// Frames and bundles

std::string frame_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d", index);
  return buf;
}

void write_frame(const fs::path& dir, const SceneFrame& frame, const SceneConfig& config) {
  fs::create_directories(dir);
  json persons = json::array();
  for (const PersonTruth& p : frame.persons) {
    json views = json::array();
    for (std::size_t s = 0; s < p.views.size(); ++s) {
      json px = json::array(), vis = json::array();
      for (int k = 0; k < kNumJoints; ++k) {
        px.push_back({p.views[s].pixels(0, k), p.views[s].pixels(1, k)});
        vis.push_back(static_cast<bool>(p.views[s].visible[k]));
      }
      views.push_back({{"sensor", config.sensors[s].id}, {"pixels", px}, {"visible", vis}});
    }
    json e = pose_to_json(p.pose);
    e["id"] = p.id;
    e["views"] = views;
    persons.push_back(e);
  }
  write_json(dir / "poses.json", {{"frame", frame.index}, {"timestamp", frame.timestamp}, {"persons", persons}});

  for (std::size_t s = 0; s < frame.depth.size(); ++s)
    write_depth(dir / ("depth_" + config.sensors[s].id + ".f32"), frame.depth[s]);
  for (std::size_t i = 0; i < frame.heatmaps.size(); ++i) {
    const fs::path pdir = dir / ("person_" + std::to_string(frame.persons[i].id));
    fs::create_directories(pdir);
    for (std::size_t s = 0; s < frame.heatmaps[i].size(); ++s)
      for (int k = 0; k < kNumJoints; ++k)
        write_patch(pdir / ("heatmap_" + config.sensors[s].id + "_" + std::string(kJointNames[k]) + ".f32"),
                    frame.heatmaps[i][s][k]);
  }
}

SceneFrame read_frame(const fs::path& dir, const SceneConfig& config) {
  const json doc = read_json(dir / "poses.json");
  SceneFrame f;
  try {
    f.index = doc.at("frame").get<int>();
    f.timestamp = doc.at("timestamp").get<double>();
    for (const auto& e : doc.at("persons")) {
      PersonTruth p;
      p.id = e.at("id").get<int>();
      p.pose = pose_from_json(e);
      for (const auto& v : e.at("views")) {
        Keypoints kp;
        for (int k = 0; k < kNumJoints; ++k) {
          kp.pixels(0, k) = v.at("pixels").at(k).at(0).get<double>();
          kp.pixels(1, k) = v.at("pixels").at(k).at(1).get<double>();
          kp.visible[k] = v.at("visible").at(k).get<bool>();
          kp.confidence[k] = kp.visible[k] ? 1.0 : 0.0;
        }
        p.views.push_back(kp);
      }
      f.persons.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw IoError(dir.string() + "/poses.json: " + e.what());
  }
  for (const Sensor& s : config.sensors) f.depth.push_back(read_depth(dir / ("depth_" + s.id + ".f32")));
  for (const PersonTruth& p : f.persons) {
    const fs::path pdir = dir / ("person_" + std::to_string(p.id));
    std::vector<std::vector<HeatmapPatch>> per_sensor;
    for (const Sensor& s : config.sensors) {
      std::vector<HeatmapPatch> maps;
      for (int k = 0; k < kNumJoints; ++k)
        maps.push_back(read_patch(pdir / ("heatmap_" + s.id + "_" + std::string(kJointNames[k]) + ".f32")));
      per_sensor.push_back(std::move(maps));
    }
    f.heatmaps.push_back(std::move(per_sensor));
  }
  return f;
}

Bundle Bundle::open(const fs::path& root) {
  Bundle b;
  b.root = root;
  b.config = scene_from_json(read_json(root / "scene.json"), read_json(root / "calibration.json"));
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().rfind("frame_", 0) == 0) b.frames.push_back(e.path());
  std::sort(b.frames.begin(), b.frames.end());
  return b;
}

json estimates_to_json(const std::vector<EstimateRecord>& records) {
  json a = json::array();
  for (const EstimateRecord& r : records) {
    json e = {{"frame", r.frame}, {"person_id", r.person_id}};
    const json p = pose_to_json(r.pose);
    e["joints"] = p.at("joints");
    e["validity"] = p.at("validity");
    e["uncertainty_nats"] = r.uncertainty ? json(*r.uncertainty) : json(nullptr);
    a.push_back(e);
  }
  return a;
}

std::vector<EstimateRecord> estimates_from_json(const json& j) {
  std::vector<EstimateRecord> out;
  if (!j.is_array()) throw IoError("estimates file must hold an array");
  try {
    for (const auto& e : j) {
      EstimateRecord r;
      r.frame = e.value("frame", 0);
      r.person_id = e.at("person_id").get<int>();
      r.pose = pose_from_json(e);
      if (e.contains("uncertainty_nats") && !e.at("uncertainty_nats").is_null())
        r.uncertainty = e.at("uncertainty_nats").get<double>();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("bad estimates file: ") + e.what());
  }
  return out;
}

}  // namespace voxfuse::io

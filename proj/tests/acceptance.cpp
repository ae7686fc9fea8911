// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. One PASS/FAIL line per criterion; the exit code
// is the number of failures.

#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "tree.hpp"
#include "voxfuse/estimate.hpp"
#include "voxfuse/losses.hpp"
#include "voxfuse/metrics.hpp"
#include "voxfuse/pipeline.hpp"
#include "voxfuse/synth.hpp"
#include "voxfuse/voxel.hpp"

using namespace voxfuse;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %-34s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... v) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, v...);
  return buf;
}

void parallel_for(int n, const std::function<void(int)>& f) {
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

std::vector<Keypoints> project_all(const Pose& pose, const std::vector<Camera>& cams) {
  std::vector<Keypoints> out;
  for (const Camera& c : cams) {
    Keypoints kp;
    for (int k = 0; k < kNumJoints; ++k) kp.pixels.col(k) = project(c, Vec3d(pose.joints.col(k)));
    out.push_back(kp);
  }
  return out;
}

/// Studio rig with four of its five sensors.
SceneConfig four_view_studio(int persons) {
  SceneConfig cfg = panoptic_preset();
  cfg.sensors.erase(cfg.sensors.begin() + 4);
  cfg.persons = persons;
  return cfg;
}

/// One person per scene at a random spot of the studio floor.
SceneFrame single_person_scene(const SceneConfig& cfg, int index, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(index) + 1));
  PoseParams pp = sample_pose_params(rng, cfg.ranges);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  pp.root = Vec3d(u(rng), u(rng), 0.0);
  return render_frame(cfg, index, {pp});
}

// ---------------------------------------------------------------------------

void entropy_exactness() {
  const auto t0 = Clock::now();
  VoxelGridSpec spec;
  VoxelHeatmap vh(spec, 3);
  vh.channel(0).setConstant(1.0 / spec.voxel_count());
  vh.channel(1)[1234] = 1.0;
  vh.channel(2)[7] = 0.5;
  vh.channel(2)[90000] = 0.5;
  vh.set_normalized(true);
  const double uni = entropy(vh, 0), delta = entropy(vh, 1), half = entropy(vh, 2);
  const double dt = seconds_since(t0);
  const bool ok = std::abs(uni - 12.476649) <= 1e-6 && std::abs(uni - std::log(262144.0)) <= 1e-6 && delta == 0.0 &&
                  std::abs(half - std::numbers::ln2) <= 1e-9 && dt < 1.0;
  report(1, "entropy exactness", ok, fmt("uniform %.7f delta %.3g half %.12f in %.3f s", uni, delta, half, dt));
}

struct PersonSample {
  double uncertainty = 0;
  double mpjpe = 0;
  bool ok = false;
};

std::vector<PersonSample> clean_samples;
std::vector<SceneFrame> clean_scenes;

void softargmax_accuracy() {
  const SceneConfig cfg = four_view_studio(1);
  constexpr int kPersons = 200;
  clean_scenes.resize(kPersons);
  for (int i = 0; i < kPersons; ++i) clean_scenes[i] = single_person_scene(cfg, i, 2026);
  FusionParams params;
  params.gating = 0.0;

  const auto t0 = Clock::now();
  clean_samples.assign(kPersons, {});
  double total = 0;
  int n = 0;
  for (int i = 0; i < kPersons; ++i) {
    const SceneFrame& f = clean_scenes[i];
    const auto est = estimate_person(cfg, f, scan_frame(cfg, f), 0, params);
    if (!est) continue;
    clean_samples[i] = {est->uncertainty, mpjpe(est->pose, f.persons[0].pose), true};
    total += clean_samples[i].mpjpe;
    ++n;
  }
  const double dt = seconds_since(t0);
  const double mean = n ? total / n : 1e9;
  report(2, "soft-argmax sub-voxel accuracy", n == kPersons && mean <= 15.6 && dt < 300,
         fmt("%d persons, mean MPJPE %.2f mm (limit 15.6), %.1f s single-threaded", n, mean, dt));
}

void dlt_exactness() {
  const auto cams = oracle::ring_rig(4);
  std::mt19937_64 rng(303);
  std::normal_distribution<double> noise(0.0, 2.0);
  double worst_exact = 0, dlt = 0, ref = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose gt = build_pose(sample_pose_params(rng, {}));
    auto kps = project_all(gt, cams);
    worst_exact = std::max(worst_exact, mpjpe(dlt_triangulate(kps, cams), gt) / 1000.0);
    for (auto& kp : kps) kp.pixels += Eigen::Matrix<double, 2, kNumJoints>::NullaryExpr([&] { return noise(rng); });
    Pose best = gt;
    for (int k = 0; k < kNumJoints; ++k) {
      std::vector<Vec2d> px;
      for (const auto& kp : kps) px.push_back(kp.pixels.col(k));
      best.joints.col(k) = oracle::reprojection_minimizer(cams, px, gt.joints.col(k));
    }
    dlt += mpjpe(dlt_triangulate(kps, cams), gt) / 100;
    ref += mpjpe(best, gt) / 100;
  }
  const double rel = std::abs(dlt - ref) / ref;
  report(3, "DLT exactness", worst_exact < 1e-6 && rel <= 0.2,
         fmt("noiseless max %.2e m; noisy %.3f mm vs oracle %.3f mm (%.1f%%)", worst_exact, dlt, ref, 100 * rel));
}

void pa_invariance() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> n(0, 0.03);
  const Pose gt = oracle::plausible_pose();
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const SimilarityTransform<double> t{std::exp(u(rng)), oracle::random_rotation(rng),
                                        Vec3d(u(rng), u(rng), u(rng)) * 10};
    worst = std::max(worst, pa_mpjpe(apply_similarity(t, gt), gt));
  }
  double worst_oracle = 0;
  for (int trial = 0; trial < 30; ++trial) {
    Pose pred = gt;
    pred.joints += Eigen::Matrix<double, 3, kNumJoints>::NullaryExpr([&] { return n(rng); });
    const SimilarityTransform<double> t{std::exp(0.3 * u(rng)), oracle::random_rotation(rng), Vec3d(u(rng), u(rng), 0)};
    pred = apply_similarity(t, pred);
    worst_oracle = std::max(worst_oracle, std::abs(pa_mpjpe(pred, gt) - oracle::aligned_mpjpe_by_search(pred, gt, trial)));
  }
  report(4, "PA-MPJPE invariance", worst <= 1e-6 && worst_oracle <= 1e-3,
         fmt("max over 1000 transforms %.2e mm; oracle gap %.2e mm", worst, worst_oracle));
}

void loss_fidelity() {
  int bad = 0;
  auto expect = [&](double got, double want) { bad += std::abs(got - want) <= 1e-12 ? 0 : 1; };
  const Pose gt = oracle::plausible_pose();
  Pose shifted = gt;
  shifted.joints.colwise() += Vec3d(0.1, 0, 0);
  expect(l_pose(gt, gt), 0);
  expect(l_pose(shifted, gt), 1.7);
  Pose one = gt;
  one.joints.col(3) += Vec3d(0.1, -0.2, 0.3);
  expect(l_pose(one, gt), 0.6);
  expect(l_3d(one, gt), 0.6);

  Mat3d k;
  k << 500, 0, 320, 0, 500, 240, 0, 0, 1;
  const std::vector<Camera> cam{Camera(k, Mat3d::Identity(), Vec3d(0, 0, 4), 640, 480)};
  auto kps = project_all(gt, cam);
  expect(l_2d<double>(gt, kps, cam).value, 0);
  kps[0].visible.fill(false);
  kps[0].visible[0] = true;
  kps[0].pixels.col(0) += Vec2d(3, 4);
  expect(l_2d<double>(gt, kps, cam).value, 5);

  const BoneSpec spec{{{0, 1}}, {}, 0.05, 0.7};
  Pose bone;
  bone.joints.col(1) = Vec3d(0.3, 0, 0);
  expect(l_length(bone, spec), 0);
  bone.joints.col(1) = Vec3d(0.8, 0, 0);
  expect(l_length(bone, spec), 0.1);
  bone.joints.col(1) = Vec3d(0.02, 0, 0);
  expect(l_length(bone, spec), 0.03);

  Pose arms = gt;
  const Vec3d dir = Vec3d(0.1, 0, -0.24).normalized();
  arms[Joint::LeftWrist] = arms[Joint::LeftElbow] + 0.30 * dir;
  arms[Joint::RightWrist] = arms[Joint::RightElbow] + 0.25 * dir;
  expect(l_symm(gt, default_bone_spec()), 0);
  expect(l_symm(arms, default_bone_spec()), 0.05);
  expect(l_angle(gt), 0);
  expect(combine_prior(0.1, 0.05, 0.2, PriorWeights{}), 0.35);

  const LossWeights w;
  const double on = compose_unsup({10, 2.0, 0.3, 4.0}, w);
  const double off = compose_unsup({10, 2.0, 0.3, 7.0}, w);
  expect(on, 5.2);
  expect(off, 3.2);
  expect(compose_unsup({0, 0.0, 0, 0}, w), 0);

  // Gradient checks at random smooth points.
  const auto cams = oracle::ring_rig(4);
  const auto obs = project_all(gt, cams);
  std::mt19937_64 rng(505);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  int short_losses = 0;
  for (LossId id : {LossId::Pose, LossId::TwoD, LossId::ThreeD, LossId::Length, LossId::Symm, LossId::Angle,
                    LossId::Prior, LossId::Unsup}) {
    int checked = 0;
    for (int trial = 0; checked < 100 && trial < 400; ++trial) {
      Pose p = gt;
      const double spread = id == LossId::Length ? 0.35 : (id == LossId::Angle ? 0.15 : 0.05);
      p.joints += spread * Eigen::Matrix<double, 3, kNumJoints>::NullaryExpr([&] { return n(rng); });
      if (id == LossId::Length) p.joints *= 0.5 + u(rng);
      Pose target = gt;
      target.joints += 0.05 * Eigen::Matrix<double, 3, kNumJoints>::NullaryExpr([&] { return n(rng); });
      LossContext ctx;
      ctx.target = &target;
      ctx.observed = obs;
      ctx.cameras = cams;
      ctx.uncertainty = 10 * u(rng);
      try {
        if (!(evaluate(id, p, ctx) > 0)) continue;
      } catch (const Error&) {
        continue;
      }
      const GradientResult g = grad(id, p, ctx);
      if (g.used_fallback) continue;
      const JointGradient num = numeric_grad(id, p, ctx, 1e-5);
      const JointGradient wide = numeric_grad(id, p, ctx, 2e-5);
      if ((wide - num).norm() > 1e-6 * num.norm() + 1e-12) continue;  // a kink is within reach
      worst = std::max(worst, (g.gradient - num).norm() / std::max(num.norm(), 1e-8));
      ++checked;
    }
    short_losses += checked < 100;
  }
  report(5, "loss-formula fidelity", bad == 0 && short_losses == 0 && worst < 1e-4,
         fmt("%d example mismatches; composition %.4f / %.4f; worst gradient rel err %.2e", bad, on, off, worst));
}

void entropy_separation() {
  const SceneConfig cfg = four_view_studio(1);
  const int n = static_cast<int>(clean_scenes.size());
  std::vector<PersonSample> corrupted(n);
  HeatmapNoise noise;
  noise.dropout = 0.5;
  noise.jitter_sigma = 8.0;
  FusionParams params;
  params.gating = 0.0;
  parallel_for(n, [&](int i) {
    if (!clean_samples[i].ok) return;
    SceneFrame f = clean_scenes[i];
    redraw_heatmaps(f, cfg, noise, mix_seed(606, i + 1));
    const auto est = estimate_person(cfg, f, scan_frame(cfg, f), 0, params);
    if (est) corrupted[i] = {est->uncertainty, mpjpe(est->pose, f.persons[0].pose), true};
  });
  std::vector<double> u, e;
  double mean_clean = 0, mean_bad = 0;
  int pairs = 0;
  for (int i = 0; i < n; ++i) {
    if (!clean_samples[i].ok || !corrupted[i].ok) continue;
    mean_clean += clean_samples[i].uncertainty;
    mean_bad += corrupted[i].uncertainty;
    ++pairs;
    for (const PersonSample* s : {&clean_samples[i], &corrupted[i]}) {
      u.push_back(s->uncertainty);
      e.push_back(s->mpjpe);
    }
  }
  mean_clean /= std::max(pairs, 1);
  mean_bad /= std::max(pairs, 1);
  const double rho = u.size() > 2 ? spearman(u, e) : 0.0;
  report(6, "entropy-plausibility separation", pairs >= 200 && mean_bad - mean_clean >= 1.0 && rho > 0.5,
         fmt("%d persons, mean uncertainty clean %.3f corrupted %.3f nats, spearman %.3f", pairs, mean_clean,
             mean_bad, rho));
}

void gating_benefit() {
  SceneConfig cfg = four_view_studio(3);
  cfg.seed = 707;
  cfg.duration = 6.0;
  const auto frames = generate_sequence(cfg);
  const int n = static_cast<int>(frames.size());
  std::vector<double> off(n, -1), on(n, -1);
  parallel_for(n, [&](int i) {
    SceneFrame f = frames[i];
    if (f.persons.size() < 2) return;
    // View 0 of person 0 shows person 1 instead.
    f.heatmaps[0][0] = f.heatmaps[1][0];
    const PointCloud cloud = scan_frame(cfg, f);
    FusionParams p;
    p.gating = 0.0;
    const auto rgb = estimate_person(cfg, f, cloud, 0, p);
    p.gating = 0.8;
    const auto gated = estimate_person(cfg, f, cloud, 0, p);
    if (!rgb || !gated) return;
    off[i] = mpjpe(rgb->pose, f.persons[0].pose);
    on[i] = mpjpe(gated->pose, f.persons[0].pose);
  });
  std::vector<double> diff;
  double mean_off = 0, mean_on = 0;
  for (int i = 0; i < n; ++i) {
    if (off[i] < 0) continue;
    diff.push_back(off[i] - on[i]);
    mean_off += off[i];
    mean_on += on[i];
  }
  const int m = static_cast<int>(diff.size());
  double p = 1.0, tstat = 0.0;
  if (m >= 2) {
    double mean = 0, var = 0;
    for (double d : diff) mean += d / m;
    for (double d : diff) var += (d - mean) * (d - mean) / (m - 1);
    tstat = mean / std::sqrt(var / m);
    p = boost::math::cdf(boost::math::complement(boost::math::students_t(m - 1), tstat));
    mean_off /= m;
    mean_on /= m;
  }
  report(7, "multi-modal benefit", m >= 50 && mean_on < mean_off && p < 0.01,
         fmt("%d paired frames, MPJPE g=0 %.1f mm vs g=0.8 %.1f mm, t=%.2f, one-sided p=%.2e", m, mean_off, mean_on,
             tstat, p));
}

void scan_contract() {
  ScanPatternParams p;
  p.alpha = 100;
  p.theta0 = 0.37;
  p.duration = 0.001;
  p.width = 640;
  p.height = 480;
  const auto pts = rose_pattern(p);
  const Vec2d c = p.resolved_centers().front();
  double far = 0;
  for (const Vec2d& q : pts) far = std::max(far, (q - c).norm());
  p.kind = ScanKind::RoseTrisection;
  const auto tri = pattern(p);
  report(8, "scan-pattern contract", pts.size() == 101 && far <= 100 + 1e-9 && tri.size() == 3 * pts.size(),
         fmt("%zu points, max radius %.6f px, trisection %zu", pts.size(), far, tri.size()));
}

void metric_sanity() {
  auto box = [](double x, double y, double z, double w, double l, double h, double yaw = 0, double score = 0) {
    Box3D b;
    b.center = Vec3d(x, y, z);
    b.size = Vec3d(w, l, h);
    b.yaw = yaw;
    b.score = score;
    return b;
  };
  const double third = iou3d(box(0, 0, 0, 1, 1, 1), box(0.5, 0, 0, 1, 1, 1));
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::pair<Box3D, Box3D>> pairs;
  for (int i = 0; i < 100; ++i)
    pairs.emplace_back(box(0, 0, 1, 0.5 + u(rng), 0.5 + u(rng), 1 + u(rng), (2 * u(rng) - 1) * std::numbers::pi),
                       box(u(rng) - 0.5, u(rng) - 0.5, 1 + 0.5 * (u(rng) - 0.5), 0.5 + u(rng), 0.5 + u(rng),
                           1 + u(rng), (2 * u(rng) - 1) * std::numbers::pi));
  std::vector<double> gap(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), [&](int i) {
    gap[i] = std::abs(iou3d(pairs[i].first, pairs[i].second) -
                      oracle::iou_monte_carlo(pairs[i].first, pairs[i].second, 1'000'000, i));
  });
  const double worst = *std::max_element(gap.begin(), gap.end());

  const std::vector<Box3D> gts{box(0, 0, 1, 1, 1, 2), box(3, 0, 1, 1, 1, 2)};
  std::vector<Box3D> perfect = gts;
  perfect[0].score = 1;
  perfect[1].score = 0.5;
  const double ap_perfect = average_precision(perfect, gts, 0.5);
  const double ap_empty = average_precision({}, gts, 0.5);
  const std::vector<Box3D> dets{box(0.05, 0, 1, 1, 1, 2, 0, 0.9), box(0.1, 0, 1, 1, 1, 2, 0, 0.8),
                                box(3.2, 0, 1, 1, 1, 2, 0, 0.7)};
  const double ap_hand = average_precision(dets, gts, 0.5);
  const double ap_brute = oracle::ap_by_enumeration({true, false, true}, 2);
  const bool ok = std::abs(third - 1.0 / 3.0) < 1e-12 && worst <= 0.005 && ap_perfect == 1.0 && ap_empty == 0.0 &&
                  std::abs(ap_hand - ap_brute) < 1e-12;
  report(9, "metric sanity", ok,
         fmt("IoU %.15f, MC gap %.4f, AP perfect %.3f empty %.3f hand %.6f vs %.6f", third, worst, ap_perfect,
             ap_empty, ap_hand, ap_brute));
}

void end_to_end_determinism() {
  testing::ScratchDir dir("acceptance_e2e");
  const std::string b = dir.str("bundle");
  auto run_all = [&] {
    std::filesystem::remove_all(b);
    std::ostringstream sink;
    auto* saved_out = std::cout.rdbuf(sink.rdbuf());
    auto* saved_err = std::cerr.rdbuf(sink.rdbuf());
    int rc = 0;
    rc |= cli::dispatch({"synth", "--preset", "panoptic", "--frames", "2", "--seed", "5", "--out", b});
    rc |= cli::dispatch({"scan", "--bundle", b});
    rc |= cli::dispatch({"estimate", "--bundle", b});
    rc |= cli::dispatch({"eval-pose", "--bundle", b, "--in", b + "/estimates.json", "--csv", b + "/eval.csv",
                         "--summary", b + "/summary.json"});
    std::cout.rdbuf(saved_out);
    std::cerr.rdbuf(saved_err);
    return rc;
  };
  const int rc1 = run_all();
  const auto first = testing::snapshot(b);
  const int rc2 = run_all();
  const auto second = testing::snapshot(b);
  report(10, "end-to-end determinism", rc1 == 0 && rc2 == 0 && first == second && first.count("eval.csv"),
         fmt("exit codes %d/%d, %zu files, identical: %s", rc1, rc2, first.size(), first == second ? "yes" : "no"));
}

}  // namespace

int main() {
  entropy_exactness();
  softargmax_accuracy();
  dlt_exactness();
  pa_invariance();
  loss_fidelity();
  entropy_separation();
  gating_benefit();
  scan_contract();
  metric_sanity();
  end_to_end_determinism();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}

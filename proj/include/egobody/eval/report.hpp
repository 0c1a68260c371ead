#pragma once

// Evaluation harness: per-sample metrics over a dataset split, the
// arrangement comparison and per-stage inference timing.

#include <fstream>
#include <sstream>
#include <thread>

#include "egobody/eval/metrics.hpp"
#include "egobody/pipeline/inference.hpp"

namespace egobody {

struct SampleMetrics {
  std::string id;
  double rmse = 0;          ///< translated front view vs ground truth, 8-bit units
  double ssim = 0;
  double joints_px = 0;     ///< 2D joint RMSE on the front view
  double joint_err_m = 0;   ///< mean root-aligned per-joint 3D error
  double vertex_err_m = 0;  ///< mean root-aligned per-vertex error
};

struct StageTiming {
  std::string stage;
  double mean_s = 0;
  double std_s = 0;
  int samples = 0;
  double reference_s = 0;  ///< reference value, not a target
};

inline std::string hardware_string() {
  std::ifstream in("/proc/cpuinfo");
  std::string line, model = "unknown cpu";
  while (std::getline(in, line))
    if (line.rfind("model name", 0) == 0) {
      model = line.substr(line.find(':') + 2);
      break;
    }
  return model + " x" + std::to_string(std::max(1u, std::thread::hardware_concurrency()));
}

struct EvalReport {
  std::vector<SampleMetrics> samples;
  std::vector<StageTiming> timings;
  std::string split = "test";
  std::string hardware = hardware_string();

  SampleMetrics aggregate() const {
    SampleMetrics a;
    a.id = "mean";
    if (samples.empty()) return a;
    for (const auto& s : samples) {
      a.rmse += s.rmse;
      a.ssim += s.ssim;
      a.joints_px += s.joints_px;
      a.joint_err_m += s.joint_err_m;
      a.vertex_err_m += s.vertex_err_m;
    }
    const double n = static_cast<double>(samples.size());
    a.rmse /= n;
    a.ssim /= n;
    a.joints_px /= n;
    a.joint_err_m /= n;
    a.vertex_err_m /= n;
    return a;
  }

  kv::Document to_document() const {
    kv::Document d;
    d.set("format_version", 1);
    d.set("kind", "eval_report");
    d.set("split", split);
    d.set("samples", static_cast<int>(samples.size()));
    d.set("note_joints", "2D joint ground truth comes from the renderer, not an external pose detector");
    d.set("note_units", "RMSE in 8-bit intensity units (0-255); SSIM on BT.601 luma");
    const SampleMetrics a = aggregate();
    d.set("mean_rmse", a.rmse);
    d.set("mean_ssim", a.ssim);
    d.set("mean_joints_px", a.joints_px);
    d.set("mean_joint_err_m", a.joint_err_m);
    d.set("mean_vertex_err_m", a.vertex_err_m);
    d.set("hardware", hardware);
    for (const auto& t : timings) {
      d.set("time." + t.stage + ".mean_s", t.mean_s);
      d.set("time." + t.stage + ".std_s", t.std_s);
      d.set("time." + t.stage + ".samples", t.samples);
      d.set("time." + t.stage + ".reference_s", t.reference_s);
    }
    if (!timings.empty()) d.set("reference_hardware", "Tesla K80 GPU");
    return d;
  }

  std::string csv() const {
    std::ostringstream o;
    o << "id,rmse,ssim,joints_px,joint_err_m,vertex_err_m\n";
    auto row = [&](const SampleMetrics& s) {
      o << s.id << "," << kv::format_number(s.rmse) << "," << kv::format_number(s.ssim) << ","
        << kv::format_number(s.joints_px) << "," << kv::format_number(s.joint_err_m) << ","
        << kv::format_number(s.vertex_err_m) << "\n";
    };
    for (const auto& s : samples) row(s);
    return o.str();
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    to_document().save(dir / "report.txt");
    std::ofstream(dir / "samples.csv") << csv();
  }

  std::string summary() const {
    const SampleMetrics a = aggregate();
    std::ostringstream o;
    o << "samples " << samples.size() << " (" << split << ")\n"
      << "  view RMSE " << a.rmse << "  SSIM " << a.ssim << "\n"
      << "  2D joint RMSE " << a.joints_px << " px\n"
      << "  3D joint error " << a.joint_err_m << " m  vertex error " << a.vertex_err_m << " m\n";
    for (const auto& t : timings)
      o << "  " << t.stage << " " << t.mean_s << " +- " << t.std_s << " s (reference " << t.reference_s << " s)\n";
    return o.str();
  }
};

/// Metrics of one inference against its ground-truth frame.
inline SampleMetrics score_inference(const InferenceResult& r, const FrameRecord& gt, const RecoveryModel& recovery,
                                     const BodyModelAsset& asset) {
  SampleMetrics s;
  s.rmse = rmse(r.tp_front, gt.tp_front);
  s.ssim = ssim(r.tp_front, gt.tp_front);
  const RecoveryTarget target = make_recovery_target(recovery.basis(), gt, gt.tp_front.width, gt.tp_front.height);
  const Eigen::MatrixX2d px =
      denormalize_pixels(project_theta<double>(recovery.basis(), r.theta.to_vector()), gt.tp_front.width, gt.tp_front.height);
  if (gt.joints2d_tp_front.visible_count() > 0)
    s.joints_px = joints_rmse(px, gt.joints2d_tp_front.pixels, gt.joints2d_tp_front.visible);
  s.joint_err_m = mean_joint_error(recovery.basis(), r.theta, target);
  BodyParams canon = gt.params;
  canon.theta = target.x.head<kNumPose>();
  const MeshAsset truth = forward(asset, canon);
  Eigen::MatrixX3d a = r.mesh.vertices, b = truth.vertices;
  a.rowwise() -= r.mesh.joints3d.row(0);
  b.rowwise() -= truth.joints3d.row(0);
  s.vertex_err_m = (a - b).rowwise().norm().mean();
  return s;
}

inline EvalReport evaluate_split(PipelineModels& m, const DatasetManifest& data, Split split, int max_frames = 0) {
  EvalReport rep;
  rep.split = split_name(split);
  auto idx = data.indices(split);
  if (max_frames > 0 && static_cast<int>(idx.size()) > max_frames) idx.resize(max_frames);
  for (std::size_t i : idx) {
    const FrameRecord gt = load_frame(data, i);
    const InferenceResult r = run_inference(m, gt.ego_front, gt.ego_back);
    SampleMetrics s = score_inference(r, gt, m.recovery, m.asset);
    s.id = data.entries[i].prefix;
    rep.samples.push_back(s);
  }
  return rep;
}

/// Mean +- std per stage over `n_samples` runs after 3 warm-up runs.
inline std::vector<StageTiming> time_pipeline(PipelineModels& m, const std::vector<std::pair<Image, Image>>& inputs,
                                              int n_samples) {
  require(!inputs.empty(), "time_pipeline: no inputs");
  require(n_samples >= 1, "time_pipeline: n_samples must be >= 1");
  constexpr int kWarmup = 3;
  std::vector<std::array<double, 3>> runs;
  for (int i = 0; i < kWarmup + n_samples; ++i) {
    const auto& [f, b] = inputs[static_cast<std::size_t>(i) % inputs.size()];
    const auto r = run_inference(m, f, b);
    if (i >= kWarmup) runs.push_back({r.seconds.translation, r.seconds.recovery, r.seconds.texture});
  }
  const std::array<const char*, 3> names = {"view_translation", "parameter_estimation", "texture_generation"};
  const std::array<double, 3> reference = {0.6, 0.12, 0.56};
  std::vector<StageTiming> out;
  for (int k = 0; k < 3; ++k) {
    StageTiming t{names[k], 0, 0, n_samples, reference[k]};
    for (const auto& r : runs) t.mean_s += r[k] / n_samples;
    for (const auto& r : runs) t.std_s += (r[k] - t.mean_s) * (r[k] - t.mean_s) / n_samples;
    t.std_s = std::sqrt(t.std_s);
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Arrangement comparison

struct ArrangementBudget {
  int steps = 200;
  int max_train_frames = 0;  ///< 0 = whole train split
  int max_test_frames = 0;   ///< 0 = whole test split
  double max_seconds = 0;    ///< per method; 0 = unlimited
  NetworkSize size;
  TrainConfig train;
};

struct ArrangementRow {
  Arrangement method = Arrangement::kA;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double ssim = std::numeric_limits<double>::quiet_NaN();
  int steps_done = 0;
  int test_frames = 0;
  bool partial = false;
  double reference_rmse = 0;
  double reference_ssim = 0;
};

struct ArrangementTable {
  std::vector<ArrangementRow> rows;

  bool partial() const {
    return std::any_of(rows.begin(), rows.end(), [](const ArrangementRow& r) { return r.partial; });
  }
  const ArrangementRow& row(Arrangement m) const {
    for (const auto& r : rows)
      if (r.method == m) return r;
    throw InvalidArgument("no row for method " + arrangement_name(m));
  }

  kv::Document to_document() const {
    kv::Document d;
    d.set("format_version", 1);
    d.set("kind", "arrangement_experiment");
    d.set("status", partial() ? "partial" : "complete");
    d.set("note_method_a", "method A views are cropped to the subject and scaled up before scoring");
    for (const auto& r : rows) {
      const std::string p = "method_" + arrangement_name(r.method) + ".";
      d.set(p + "rmse", r.rmse);
      d.set(p + "ssim", r.ssim);
      d.set(p + "steps", r.steps_done);
      d.set(p + "test_frames", r.test_frames);
      d.set(p + "partial", r.partial ? 1 : 0);
      d.set(p + "reference_rmse", r.reference_rmse);
      d.set(p + "reference_ssim", r.reference_ssim);
    }
    return d;
  }

  std::string csv() const {
    std::ostringstream o;
    o << "method,rmse,ssim,reference_rmse,reference_ssim,steps,partial\n";
    for (const auto& r : rows)
      o << arrangement_name(r.method) << "," << kv::format_number(r.rmse) << "," << kv::format_number(r.ssim) << ","
        << kv::format_number(r.reference_rmse) << "," << kv::format_number(r.reference_ssim) << "," << r.steps_done << ","
        << (r.partial ? 1 : 0) << "\n";
    return o.str();
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    to_document().save(dir / "arrangements.txt");
    std::ofstream(dir / "arrangements.csv") << csv();
  }

  std::string summary() const {
    std::ostringstream o;
    o << "method    RMSE      SSIM    | ref. RMSE   SSIM" << (partial() ? "   [PARTIAL]" : "") << "\n";
    char buf[160];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-6s %8.3f  %8.4f   | %8.1f  %6.2f%s\n", arrangement_name(r.method).c_str(), r.rmse,
                    r.ssim, r.reference_rmse, r.reference_ssim, r.partial ? "  (partial)" : "");
      o << buf;
    }
    return o.str();
  }
};

/// Bounding box of pixels that differ from the background, as {x0, y0, w, h}.
inline std::array<int, 4> subject_box(const Image& img, Rgb background, int margin = 2) {
  int x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.rgb(x, y) != background) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return {0, 0, img.width, img.height};
  x0 = std::max(0, x0 - margin);
  y0 = std::max(0, y0 - margin);
  x1 = std::min(img.width - 1, x1 + margin);
  y1 = std::min(img.height - 1, y1 + margin);
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

/// Crops both views to the ground-truth subject box and scales them back up.
inline std::pair<Image, Image> crop_to_subject(const Image& pred, const Image& gt, Rgb background) {
  auto [x, y, w, h] = subject_box(gt, background);
  if (w < 11 || h < 11) return {pred, gt};
  return {resize_bilinear(crop(pred, x, y, w, h), gt.width, gt.height), resize_bilinear(crop(gt, x, y, w, h), gt.width, gt.height)};
}

/// Trains one translation model per arrangement with identical settings and
/// scores the test split.
inline ArrangementTable run_arrangement_experiment(const DatasetManifest& data, const ArrangementBudget& budget,
                                                   const std::function<void(const std::string&)>& log = {}) {
  using clock = std::chrono::steady_clock;
  const int res = data.config.resolution;
  const Rgb bg = data.config.background;
  auto train_idx = data.indices(Split::kTrain);
  auto test_idx = data.indices(Split::kTest);
  if (budget.max_train_frames > 0 && static_cast<int>(train_idx.size()) > budget.max_train_frames)
    train_idx.resize(budget.max_train_frames);
  if (budget.max_test_frames > 0 && static_cast<int>(test_idx.size()) > budget.max_test_frames)
    test_idx.resize(budget.max_test_frames);
  std::vector<FrameRecord> test;
  for (std::size_t i : test_idx) test.push_back(load_frame(data, i));

  const std::array<std::pair<double, double>, 3> reference = {{{89.0, 0.67}, {53.2, 0.72}, {40.1, 0.89}}};
  ArrangementTable table;
  for (Arrangement method : {Arrangement::kA, Arrangement::kB, Arrangement::kC}) {
    ArrangementRow row;
    row.method = method;
    row.reference_rmse = reference[static_cast<int>(method)].first;
    row.reference_ssim = reference[static_cast<int>(method)].second;
    TrainConfig tc = budget.train;
    tc.method = method;
    GanModel model = make_translation_model(res, budget.size, tc);
    if (!train_idx.empty()) {
      const PairCache cache = load_pairs(model, data, train_idx, translation_pairs(method));
      const auto start = clock::now();
      for (; row.steps_done < budget.steps; ++row.steps_done) {
        if (budget.max_seconds > 0 &&
            std::chrono::duration<double>(clock::now() - start).count() > budget.max_seconds)
          break;
        TrainLoopOptions opt;
        opt.steps = 1;
        train_gan(model, cache, opt);
      }
    }
    row.partial = row.steps_done < budget.steps || test.empty();
    if (!test.empty()) {
      double r = 0, s = 0;
      for (const auto& gt : test) {
        const auto [pf, pb] = unarrange_target(translate(model, gt.ego_stacked(), false), method);
        const std::array<std::pair<Image, Image>, 2> views = {{{pf, gt.tp_front}, {pb, gt.tp_back}}};
        for (auto [p, g] : views) {
          if (method == Arrangement::kA) std::tie(p, g) = crop_to_subject(p, g, bg);
          r += rmse(p, g) / 2;
          s += ssim(p, g) / 2;
        }
      }
      row.rmse = r / static_cast<double>(test.size());
      row.ssim = s / static_cast<double>(test.size());
      row.test_frames = static_cast<int>(test.size());
    }
    if (log)
      log("method " + arrangement_name(method) + ": " + std::to_string(row.steps_done) + " steps, RMSE " +
          std::to_string(row.rmse) + ", SSIM " + std::to_string(row.ssim));
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace egobody

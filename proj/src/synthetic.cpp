// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <tuple>

#include "cm3ae/data/image_io.hpp"
#include "cm3ae/data/sample.hpp"
#include "cm3ae/data/voxel_io.hpp"

namespace cm3ae {

namespace {

struct Shape {
  int kind = 0;  // 0 square, 1 disk, 2 triangle, 3 cross
  double cx = 0, cy = 0;
  double radius = 0;
  double dx = 0, dy = 0;
  float color[3] = {0, 0, 0};
};

bool shape_covers(const Shape& s, double t, double px, double py) {
  const double x = px - (s.cx + t * s.dx);
  const double y = py - (s.cy + t * s.dy);
  const double r = s.radius;
  switch (s.kind) {
    case 0:
      return std::abs(x) <= r && std::abs(y) <= r;
    case 1:
      return x * x + y * y <= r * r;
    case 2:  // upward triangle
      return y >= -r && y <= r && std::abs(x) <= (y + r) * 0.5;
    case 3:  // plus sign
      return (std::abs(x) <= r * 0.35 && std::abs(y) <= r) || (std::abs(y) <= r * 0.35 && std::abs(x) <= r);
    default:
      return false;
  }
}

struct Scene {
  std::vector<Shape> shapes;  // index 0 is the dominant (label) shape, drawn on top
  ImageArray background;
};

Scene make_scene(Rng& rng, const SyntheticConfig& cfg, int label) {
  const int n = cfg.image_size;
  Scene scene;
  scene.background = ImageArray(n, n, 3);
  const double base = rng.uniform(0.15, 0.45);
  const double gx = rng.uniform(-0.2, 0.2);
  const double gy = rng.uniform(-0.2, 0.2);
  // static texture: identical in both frames, so it never fires events
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double v = base + gx * x / n + gy * y / n;
      for (int c = 0; c < 3; ++c) {
        const double tex = cfg.texture_amplitude * (rng.uniform() - 0.5);
        scene.background.at(y, x, c) = static_cast<float>(std::clamp(v + tex, 0.0, 1.0));
      }
    }
  }

  const int count = std::max(1, cfg.shape_count);
  for (int i = 0; i < count; ++i) {
    Shape s;
    s.kind = (i == 0) ? label : static_cast<int>(rng.below(static_cast<uint64_t>(cfg.classes)));
    const double rmin = n * (i == 0 ? 0.16 : 0.06);
    const double rmax = n * (i == 0 ? 0.24 : 0.12);
    s.radius = rng.uniform(rmin, rmax);
    s.cx = rng.uniform(s.radius, n - s.radius);
    s.cy = rng.uniform(s.radius, n - s.radius);
    s.dx = rng.uniform(-cfg.motion_magnitude, cfg.motion_magnitude);
    s.dy = rng.uniform(-cfg.motion_magnitude, cfg.motion_magnitude);
    for (float& c : s.color) c = static_cast<float>(rng.uniform(0.05, 0.95));
    scene.shapes.push_back(s);
  }
  return scene;
}

ImageArray render(const Scene& scene, double t) {
  ImageArray frame = scene.background;
  // distractors first, dominant shape last so it stays on top
  for (size_t i = scene.shapes.size(); i-- > 0;) {
    const Shape& s = scene.shapes[i];
    for (int y = 0; y < frame.height; ++y) {
      for (int x = 0; x < frame.width; ++x) {
        if (shape_covers(s, t, x + 0.5, y + 0.5)) {
          for (int c = 0; c < 3; ++c) frame.at(y, x, c) = s.color[c];
        }
      }
    }
  }
  return frame;
}

float luminance(const ImageArray& img, int y, int x) {
  return (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0f;
}

// Per-pixel brightness change between the two frames, modelled as linear in
// time: a pixel whose change is delta emits floor(|delta|/threshold) events at
// the threshold-crossing times k*threshold/|delta|.
std::vector<RawEvent> events_from_frames(const ImageArray& f0, const ImageArray& f1, double threshold) {
  std::vector<RawEvent> events;
  for (int y = 0; y < f0.height; ++y) {
    for (int x = 0; x < f0.width; ++x) {
      const double delta = static_cast<double>(luminance(f1, y, x)) - luminance(f0, y, x);
      const double mag = std::abs(delta);
      const int k = static_cast<int>(mag / threshold);
      for (int i = 1; i <= k; ++i) {
        RawEvent ev;
        ev.x = x;
        ev.y = y;
        ev.t = static_cast<float>(i * threshold / mag);
        ev.polarity = delta > 0 ? 1 : 0;
        events.push_back(ev);
      }
    }
  }
  return events;
}

ImageArray render_event_frame(const std::vector<RawEvent>& events, int size) {
  ImageArray frame(size, size, 3);
  for (const RawEvent& ev : events) {
    frame.at(ev.y, ev.x, ev.polarity ? 0 : 2) = 1.0f;
  }
  return frame;
}

// Bins events into a (gx, gy, gt) grid; each occupied cell becomes one record
// of up to events_per_voxel events sorted by (t, y, x), padded by repetition
// when short and truncated to the earliest when long. Cell order is
// (t-bin, y-bin, x-bin) ascending. Attributes are normalized to [0,1].
VoxelSet voxelize(const std::vector<RawEvent>& events, const SyntheticConfig& cfg) {
  const int size = cfg.image_size;
  const int gxy = cfg.vox_grid_xy, gt = cfg.vox_grid_t;
  std::map<std::tuple<int, int, int>, std::vector<const RawEvent*>> cells;
  for (const RawEvent& ev : events) {
    const int bx = std::min(ev.x * gxy / size, gxy - 1);
    const int by = std::min(ev.y * gxy / size, gxy - 1);
    const int bt = std::min(static_cast<int>(ev.t * gt), gt - 1);
    cells[{bt, by, bx}].push_back(&ev);
  }

  const int e = cfg.events_per_voxel;
  const int a = 4;
  VoxelSet raw;
  raw.events_per_voxel = e;
  raw.attrs_per_event = a;
  raw.records = Mat<float>(static_cast<int>(cells.size()), e * a);
  const float denom = static_cast<float>(size - 1);
  int row = 0;
  for (auto& [key, evs] : cells) {
    std::stable_sort(evs.begin(), evs.end(), [](const RawEvent* l, const RawEvent* r) {
      return std::tie(l->t, l->y, l->x) < std::tie(r->t, r->y, r->x);
    });
    float* rec = raw.records.row(row++);
    for (int i = 0; i < e; ++i) {
      const RawEvent& ev = *evs[static_cast<size_t>(i) % evs.size()];
      rec[i * a + 0] = static_cast<float>(ev.x) / denom;
      rec[i * a + 1] = static_cast<float>(ev.y) / denom;
      rec[i * a + 2] = ev.t;
      rec[i * a + 3] = static_cast<float>(ev.polarity);
    }
  }
  return raw;
}

Scene generate_scene_with_events(uint64_t seed, const SyntheticConfig& cfg, std::vector<RawEvent>& events,
                                 ImageArray& frame0, ImageArray& frame1) {
  const int label = static_cast<int>(seed % static_cast<uint64_t>(cfg.classes));
  Rng rng(seed, /*stream=*/0xda7a);
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    Scene scene = make_scene(rng, cfg, label);
    frame0 = render(scene, 0.0);
    frame1 = render(scene, 1.0);
    events = events_from_frames(frame0, frame1, cfg.event_threshold);
    if (!events.empty()) return scene;
  }
  throw std::runtime_error("generate_synthetic_pair: no events after " + std::to_string(cfg.max_retries) +
                           " attempts (motion too small for the event threshold?)");
}

}  // namespace

std::vector<RawEvent> generate_synthetic_events(uint64_t seed, const SyntheticConfig& cfg) {
  std::vector<RawEvent> events;
  ImageArray f0, f1;
  generate_scene_with_events(seed, cfg, events, f0, f1);
  return events;
}

SamplePair generate_synthetic_pair(uint64_t seed, const SyntheticConfig& cfg) {
  if (cfg.image_size <= 0 || cfg.classes <= 0 || cfg.event_threshold <= 0.0)
    throw std::invalid_argument("generate_synthetic_pair: invalid config");
  std::vector<RawEvent> events;
  ImageArray f0, f1;
  generate_scene_with_events(seed, cfg, events, f0, f1);

  SamplePair out;
  out.rgb = f1;
  out.event = render_event_frame(events, cfg.image_size);
  const VoxelSet raw = voxelize(events, cfg);
  Rng resample_rng(seed, /*stream=*/0x50f7);
  out.voxels = resample_voxels(raw, cfg.voxel_count, resample_rng);
  out.label = static_cast<int>(seed % static_cast<uint64_t>(cfg.classes));
  return out;
}

void save_sample(const SamplePair& sample, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_png_rgb(sample.rgb, dir + "/rgb.png");
  write_png_rgb(sample.event, dir + "/event.png");
  if (!sample.voxels.empty()) write_voxel_file(sample.voxels, dir + "/events.vox");
  if (sample.label >= 0) {
    std::ofstream lf(dir + "/label.txt", std::ios::trunc);
    lf << sample.label << "\n";
  }
}

SamplePair load_sample(const std::string& dir, bool require_voxels) {
  namespace fs = std::filesystem;
  auto need = [&](const std::string& f) {
    const std::string path = dir + "/" + f;
    if (!fs::exists(path)) throw std::runtime_error("sample file not found: " + path);
    return path;
  };
  SamplePair out;
  out.rgb = read_png_rgb(need("rgb.png"));
  out.event = read_png_rgb(need("event.png"));
  if (out.rgb.height != out.event.height || out.rgb.width != out.event.width) {
    throw std::runtime_error("sample dimension mismatch between rgb.png and event.png in " + dir);
  }
  const std::string vox_path = dir + "/events.vox";
  if (fs::exists(vox_path)) {
    out.voxels = read_voxel_file(vox_path);
  } else if (require_voxels) {
    throw std::runtime_error("sample file not found: " + vox_path);
  }
  const std::string label_path = dir + "/label.txt";
  if (fs::exists(label_path)) {
    std::ifstream lf(label_path);
    if (!(lf >> out.label)) throw std::runtime_error("unreadable label file: " + label_path);
  }
  return out;
}

}  // namespace cm3ae

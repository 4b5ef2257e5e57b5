// Copyright 2026 The PST2 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pst2/config.h"

#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

#include "pst2/errors.h"
#include "pst2/formats.h"

namespace pst2 {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t parse_u64(std::string_view s, const std::string& key) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ContractError("config '" + key + "': expected a non-negative integer, got '" +
                        std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s, const std::string& key) {
  const std::string str(s);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size()) {
    throw ContractError("config '" + key + "': expected a number, got '" + str + "'");
  }
  return v;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt_double(v[i]);
  return out;
}

std::string join_groups(const std::vector<std::vector<std::size_t>>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + join_sizes(v[i]);
  return out;
}

// Ground/objects split used when a preset fixes the points per frame.
void fit_scene(SceneSpec& s, Task task, std::size_t points) {
  if (task == Task::kCls) {
    s.num_objects = 1;
    s.object_point_counts = {points};
    s.num_static_points = 0;
  } else {
    const std::size_t per_object = points * 3 / 16;
    s.num_objects = 2;
    s.object_point_counts = {per_object, per_object};
    s.num_static_points = points - 2 * per_object;
  }
}

// Tracks which keys were read so leftovers can be reported.
class Reader {
 public:
  explicit Reader(const KeyValueConfig& kv) : kv_(kv) {}
  const KeyValueConfig& use(const std::string& key) {
    used_.insert(key);
    return kv_;
  }
  void reject_unknown() const {
    for (const auto& [k, v] : kv_.entries()) {
      if (!used_.count(k)) throw ContractError("config: unknown key '" + k + "'");
    }
  }

 private:
  const KeyValueConfig& kv_;
  std::set<std::string> used_;
};

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig c;
  std::size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ContractError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ContractError("config line " + std::to_string(line_no) + ": empty key");
    if (c.has(key)) {
      throw ContractError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    c.values_[key] = std::string(trim(line.substr(eq + 1)));
  }
  return c;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_double(values_.at(key), key) : fallback;
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  return has(key) ? static_cast<std::size_t>(parse_u64(values_.at(key), key)) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? parse_u64(values_.at(key), key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = values_.at(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ContractError("config '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::size_t> KeyValueConfig::get_sizes(const std::string& key,
                                                   std::vector<std::size_t> fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::size_t> out;
  if (values_.at(key).empty()) return out;
  for (auto part : split(values_.at(key), ',')) out.push_back(parse_u64(part, key));
  return out;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  if (values_.at(key).empty()) return out;
  for (auto part : split(values_.at(key), ',')) out.push_back(parse_double(part, key));
  return out;
}

std::vector<std::vector<std::size_t>> KeyValueConfig::get_size_groups(
    const std::string& key, std::vector<std::vector<std::size_t>> fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::vector<std::size_t>> out;
  if (values_.at(key).empty()) return out;
  for (auto group : split(values_.at(key), ';')) {
    std::vector<std::size_t> g;
    if (!group.empty()) {
      for (auto part : split(group, ',')) g.push_back(parse_u64(part, key));
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::vector<TrainPreset> msr_preset_rows() {
  return {{"msr", 0.001, 16, 2048, 4},
          {"msr", 0.001, 8, 8192, 8},
          {"msr", 0.001, 8, 8192, 12},
          {"msr", 0.001, 8, 10240, 16}};
}

TrainPreset preset_by_name(const std::string& name, std::optional<std::size_t> frames,
                           bool classification) {
  TrainPreset p;
  if (name == "synthia") {
    p = {"synthia", 0.0016, 2, 16384, 3};
  } else if (name == "kitti") {
    p = {"kitti", 0.012, 2, 16384, 3};
  } else if (name == "msr") {
    const auto rows = msr_preset_rows();
    const std::size_t want = frames.value_or(16);
    for (const auto& row : rows) {
      if (row.frames == want) return row;
    }
    throw ContractError("preset msr: no row for " + std::to_string(want) +
                        " frames (expected 4, 8, 12 or 16)");
  } else if (name == "desk") {
    p = classification ? TrainPreset{"desk", 0.001, 8, 128, 8} : TrainPreset{"desk", 0.001, 2, 512, 3};
  } else {
    throw ContractError("unknown preset '" + name + "' (expected synthia, kitti, msr or desk)");
  }
  if (frames) p.frames = *frames;
  return p;
}

std::string task_name(Task task) { return task == Task::kSeg ? "seg" : "cls"; }

Task parse_task(const std::string& name) {
  if (name == "seg") return Task::kSeg;
  if (name == "cls") return Task::kCls;
  throw ContractError("unknown task '" + name + "' (expected seg or cls)");
}

RunConfig resolve_run_config(const KeyValueConfig& kv, std::optional<Task> task_override,
                             std::optional<std::string> preset_override) {
  Reader r(kv);
  RunConfig c;
  c.task = task_override ? *task_override : parse_task(r.use("task").get("task", "seg"));
  r.use("task");
  c.preset = preset_override ? *preset_override : r.use("preset").get("preset", "desk");
  r.use("preset");
  const bool cls = c.task == Task::kCls;
  std::optional<std::size_t> frames;
  if (kv.has("frames")) frames = r.use("frames").get_size("frames", 0);
  const TrainPreset p = preset_by_name(c.preset, frames, cls);
  c.lr = r.use("lr").get_double("lr", p.lr);
  c.batch = r.use("batch").get_size("batch", p.batch);
  c.points = r.use("points").get_size("points", p.points);
  c.frames = p.frames;
  c.seed = r.use("seed").get_u64("seed", 0);
  c.data_seed = r.use("data_seed").get_u64("data_seed", 1);
  c.steps = r.use("steps").get_size("steps", cls ? 600 : 500);
  c.train_sequences = r.use("train_sequences").get_size("train_sequences", cls ? 160 : 4);
  c.test_sequences = r.use("test_sequences").get_size("test_sequences", cls ? 40 : 0);
  const std::string dtype = r.use("dtype").get("dtype", "f32");
  if (dtype != "f32" && dtype != "f64") throw ContractError("config 'dtype': expected f32 or f64");
  c.dtype = dtype == "f32" ? DType::kFloat32 : DType::kFloat64;
  if (kv.has("ignore_label")) {
    const std::string v = r.use("ignore_label").get("ignore_label", "none");
    if (v != "none") c.ignore_label = static_cast<std::int32_t>(parse_u64(v, "ignore_label"));
  }
  c.train_dir = r.use("train_dir").get("train_dir", "");
  c.test_dir = r.use("test_dir").get("test_dir", "");

  SceneSpec& s = c.scene;
  fit_scene(s, c.task, c.points);
  s.frames = c.frames;
  s.num_static_points = r.use("scene.static_points").get_size("scene.static_points", s.num_static_points);
  s.num_objects = r.use("scene.objects").get_size("scene.objects", s.num_objects);
  s.object_point_counts =
      r.use("scene.object_points").get_sizes("scene.object_points", s.object_point_counts);
  s.min_speed = r.use("scene.min_speed").get_double("scene.min_speed", s.min_speed);
  s.max_speed = r.use("scene.max_speed").get_double("scene.max_speed", s.max_speed);
  s.noise_sigma = r.use("scene.noise").get_double("scene.noise", s.noise_sigma);
  s.object_classes = r.use("scene.object_classes").get_size("scene.object_classes", s.object_classes);
  s.extent = r.use("scene.extent").get_double("scene.extent", s.extent);
  s.seed = c.data_seed;
  s.validate();

  const std::string arch = r.use("seg.arch").get("seg.arch", c.preset == "desk" ? "desk" : "full");
  if (arch != "desk" && arch != "full") throw ContractError("config 'seg.arch': expected desk or full");
  SegNetConfig& g = c.seg;
  g = arch == "desk" ? SegNetConfig::desk() : SegNetConfig::full();
  g.feat_width = r.use("seg.feat_width").get_size("seg.feat_width", 1);
  g.num_classes = r.use("seg.num_classes").get_size("seg.num_classes", s.num_classes());
  {
    std::vector<std::size_t> pts, ks;
    std::vector<double> radii;
    std::vector<std::vector<std::size_t>> mlps;
    for (const auto& st : g.stages) {
      pts.push_back(st.points);
      radii.push_back(st.radius);
      ks.push_back(st.k);
      mlps.push_back(st.mlp);
    }
    pts = r.use("seg.sa_points").get_sizes("seg.sa_points", pts);
    radii = r.use("seg.sa_radii").get_doubles("seg.sa_radii", radii);
    ks = r.use("seg.sa_k").get_sizes("seg.sa_k", ks);
    mlps = r.use("seg.sa_mlps").get_size_groups("seg.sa_mlps", mlps);
    if (radii.size() != pts.size() || ks.size() != pts.size() || mlps.size() != pts.size()) {
      throw ContractError("config: seg.sa_points, seg.sa_radii, seg.sa_k and seg.sa_mlps must "
                          "have one entry per stage");
    }
    g.stages.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) g.stages.push_back({pts[i], radii[i], ks[i], mlps[i]});
  }
  g.use_re = r.use("seg.use_re").get_bool("seg.use_re", g.use_re);
  g.use_stsa = r.use("seg.use_stsa").get_bool("seg.use_stsa", g.use_stsa);
  g.re.feature_mlp = r.use("seg.re_feature_mlp").get_sizes("seg.re_feature_mlp", g.re.feature_mlp);
  g.re.resolution_mlp =
      r.use("seg.re_resolution_mlp").get_sizes("seg.re_resolution_mlp", g.re.resolution_mlp);
  g.re.output_dim = r.use("seg.re_output_dim").get_size("seg.re_output_dim", g.re.output_dim);
  g.re.radius = r.use("seg.re_radius").get_double("seg.re_radius", g.re.radius);
  g.re.k = r.use("seg.re_k").get_size("seg.re_k", g.re.k);
  g.stsa_dim = r.use("seg.stsa_dim").get_size("seg.stsa_dim", g.stsa_dim);
  g.window = r.use("seg.window").get_size("seg.window", g.window);
  g.stride = r.use("seg.stride").get_size("seg.stride", g.stride);
  g.fp_mlps = r.use("seg.fp_mlps").get_size_groups("seg.fp_mlps", g.fp_mlps);
  g.re_fp_mlp = r.use("seg.re_fp_mlp").get_sizes("seg.re_fp_mlp", g.re_fp_mlp);
  g.head_mlp = r.use("seg.head_mlp").get_sizes("seg.head_mlp", g.head_mlp);
  g.interp_neighbors = r.use("seg.interp_neighbors").get_size("seg.interp_neighbors", g.interp_neighbors);

  ClsNetConfig& k = c.cls;
  k = ClsNetConfig::desk();
  k.feat_width = r.use("cls.feat_width").get_size("cls.feat_width", 1);
  k.num_classes = r.use("cls.num_classes").get_size("cls.num_classes", kMotionDirections);
  k.seeds = r.use("cls.seeds").get_size("cls.seeds", k.seeds);
  k.radius = r.use("cls.radius").get_double("cls.radius", k.radius);
  k.k = r.use("cls.k").get_size("cls.k", k.k);
  k.sa_mlp = r.use("cls.sa_mlp").get_sizes("cls.sa_mlp", k.sa_mlp);
  const std::string temporal = r.use("cls.temporal").get("cls.temporal", "stsa");
  if (temporal != "stsa" && temporal != "meanpool") {
    throw ContractError("config 'cls.temporal': expected stsa or meanpool");
  }
  k.temporal = temporal == "stsa" ? TemporalMode::kStsa : TemporalMode::kMeanPool;
  k.stsa_dim = r.use("cls.stsa_dim").get_size("cls.stsa_dim", k.stsa_dim);
  k.window = r.use("cls.window").get_size("cls.window", k.window);
  k.stride = r.use("cls.stride").get_size("cls.stride", k.stride);
  k.head_mlp = r.use("cls.head_mlp").get_sizes("cls.head_mlp", k.head_mlp);

  r.reject_unknown();
  if (c.batch < 1) throw ContractError("config 'batch' must be >= 1");
  if (!(c.lr >= 0)) throw ContractError("config 'lr' must be >= 0");
  if (cls) {
    k.validate();
  } else {
    g.validate();
  }
  return c;
}

KeyValueConfig RunConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("task", task_name(task));
  kv.set("preset", preset);
  kv.set("seed", std::to_string(seed));
  kv.set("data_seed", std::to_string(data_seed));
  kv.set("lr", fmt_double(lr));
  kv.set("batch", std::to_string(batch));
  kv.set("steps", std::to_string(steps));
  kv.set("points", std::to_string(points));
  kv.set("frames", std::to_string(frames));
  kv.set("train_sequences", std::to_string(train_sequences));
  kv.set("test_sequences", std::to_string(test_sequences));
  kv.set("dtype", dtype == DType::kFloat32 ? "f32" : "f64");
  kv.set("ignore_label", ignore_label ? std::to_string(*ignore_label) : "none");
  if (!train_dir.empty()) kv.set("train_dir", train_dir);
  if (!test_dir.empty()) kv.set("test_dir", test_dir);

  kv.set("scene.static_points", std::to_string(scene.num_static_points));
  kv.set("scene.objects", std::to_string(scene.num_objects));
  kv.set("scene.object_points", join_sizes(scene.object_point_counts));
  kv.set("scene.min_speed", fmt_double(scene.min_speed));
  kv.set("scene.max_speed", fmt_double(scene.max_speed));
  kv.set("scene.noise", fmt_double(scene.noise_sigma));
  kv.set("scene.object_classes", std::to_string(scene.object_classes));
  kv.set("scene.extent", fmt_double(scene.extent));

  if (task == Task::kSeg) {
    std::vector<std::size_t> pts, ks;
    std::vector<double> radii;
    std::vector<std::vector<std::size_t>> mlps;
    for (const auto& st : seg.stages) {
      pts.push_back(st.points);
      radii.push_back(st.radius);
      ks.push_back(st.k);
      mlps.push_back(st.mlp);
    }
    kv.set("seg.feat_width", std::to_string(seg.feat_width));
    kv.set("seg.num_classes", std::to_string(seg.num_classes));
    kv.set("seg.sa_points", join_sizes(pts));
    kv.set("seg.sa_radii", join_doubles(radii));
    kv.set("seg.sa_k", join_sizes(ks));
    kv.set("seg.sa_mlps", join_groups(mlps));
    kv.set("seg.use_re", seg.use_re ? "true" : "false");
    kv.set("seg.use_stsa", seg.use_stsa ? "true" : "false");
    kv.set("seg.re_feature_mlp", join_sizes(seg.re.feature_mlp));
    kv.set("seg.re_resolution_mlp", join_sizes(seg.re.resolution_mlp));
    kv.set("seg.re_output_dim", std::to_string(seg.re.output_dim));
    kv.set("seg.re_radius", fmt_double(seg.re.radius));
    kv.set("seg.re_k", std::to_string(seg.re.k));
    kv.set("seg.stsa_dim", std::to_string(seg.stsa_dim));
    kv.set("seg.window", std::to_string(seg.window));
    kv.set("seg.stride", std::to_string(seg.stride));
    kv.set("seg.fp_mlps", join_groups(seg.fp_mlps));
    kv.set("seg.re_fp_mlp", join_sizes(seg.re_fp_mlp));
    kv.set("seg.head_mlp", join_sizes(seg.head_mlp));
    kv.set("seg.interp_neighbors", std::to_string(seg.interp_neighbors));
  } else {
    kv.set("cls.feat_width", std::to_string(cls.feat_width));
    kv.set("cls.num_classes", std::to_string(cls.num_classes));
    kv.set("cls.seeds", std::to_string(cls.seeds));
    kv.set("cls.radius", fmt_double(cls.radius));
    kv.set("cls.k", std::to_string(cls.k));
    kv.set("cls.sa_mlp", join_sizes(cls.sa_mlp));
    kv.set("cls.temporal", cls.temporal == TemporalMode::kStsa ? "stsa" : "meanpool");
    kv.set("cls.stsa_dim", std::to_string(cls.stsa_dim));
    kv.set("cls.window", std::to_string(cls.window));
    kv.set("cls.stride", std::to_string(cls.stride));
    kv.set("cls.head_mlp", join_sizes(cls.head_mlp));
  }
  return kv;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_kv().to_text())));
  return buf;
}

}  // namespace pst2

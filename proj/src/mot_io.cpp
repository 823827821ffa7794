#include "kinetrack/scene.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kinetrack {

std::size_t Scene::detection_count() const {
  std::size_t n = 0;
  for (const auto& [frame, dets] : frames) n += dets.size();
  return n;
}

int Scene::last_frame() const { return frames.empty() ? 0 : frames.rbegin()->first; }

std::map<int, std::vector<std::pair<int, BBox>>> Scene::trajectories() const {
  std::map<int, std::vector<std::pair<int, BBox>>> out;
  for (const auto& [frame, dets] : frames) {
    for (const auto& d : dets) {
      if (d.id >= 0) out[d.id].emplace_back(frame, d.box);
    }
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

}  // namespace

SequenceInfo read_seqinfo(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing sequence metadata: " + path.string());
  SequenceInfo info;
  info.name = path.parent_path().filename().string();
  bool have_w = false, have_h = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '[' || t[0] == ';' || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    double num = 0;
    const bool numeric = parse_double(value, num);
    auto need_number = [&]() {
      if (!numeric) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": '" + key + "' is not a number");
      }
    };
    if (key == "name") {
      info.name = value;
    } else if (key == "imWidth") {
      need_number();
      info.width = static_cast<int>(num);
      have_w = true;
    } else if (key == "imHeight") {
      need_number();
      info.height = static_cast<int>(num);
      have_h = true;
    } else if (key == "frameRate") {
      need_number();
      info.fps = num;
    } else if (key == "seqLength") {
      need_number();
      info.length = static_cast<int>(num);
    }
  }
  if (!have_w || !have_h || info.width <= 0 || info.height <= 0) {
    throw FormatError("sequence metadata lacks a positive imWidth/imHeight: " + path.string());
  }
  return info;
}

void write_seqinfo(const std::filesystem::path& path, const SequenceInfo& info) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "[Sequence]\n"
      << "name=" << info.name << "\n"
      << "imDir=img1\n"
      << "frameRate=" << format_number(info.fps) << "\n"
      << "seqLength=" << info.length << "\n"
      << "imWidth=" << info.width << "\n"
      << "imHeight=" << info.height << "\n"
      << "imExt=.jpg\n";
}

Scene parse_mot(const std::filesystem::path& path, const SequenceInfo& info) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open MOT file: " + path.string());
  Scene scene;
  scene.info = info;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    auto fail = [&](const std::string& why) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() < 6 || fields.size() > 10) fail("expected 6 to 10 comma-separated fields");
    double v[7] = {0, 0, 0, 0, 0, 0, 1.0};
    const std::size_t used = std::min<std::size_t>(fields.size(), 7);
    for (std::size_t k = 0; k < used; ++k) {
      if (!parse_double(fields[k], v[k])) fail("field " + std::to_string(k + 1) + " is not a number");
    }
    for (std::size_t k = 7; k < fields.size(); ++k) {
      double ignored;
      if (!parse_double(fields[k], ignored)) fail("field " + std::to_string(k + 1) + " is not a number");
    }
    const int frame = static_cast<int>(v[0]);
    if (frame < 1 || static_cast<double>(frame) != v[0]) fail("frame must be a positive integer");
    if (!(v[4] > 0.0) || !(v[5] > 0.0)) fail("box width and height must be positive");
    Detection d;
    d.id = static_cast<int>(v[1]);
    d.box = BBox::from_tlwh(v[2], v[3], v[4], v[5], info.width, info.height);
    d.confidence = v[6];
    scene.frames[frame].push_back(d);
  }
  return scene;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s(buf);
  const auto dot = s.find('.');
  if (dot != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

void write_mot(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [frame, dets] : scene.frames) {
    std::vector<const Detection*> rows;
    for (const auto& d : dets) rows.push_back(&d);
    std::stable_sort(rows.begin(), rows.end(), [](const Detection* a, const Detection* b) { return a->id < b->id; });
    for (const Detection* d : rows) {
      const auto px = d->box.to_tlwh(scene.info.width, scene.info.height);
      out << frame << ',' << d->id << ',' << format_number(px.left) << ',' << format_number(px.top) << ','
          << format_number(px.width) << ',' << format_number(px.height) << ','
          << format_number(d->confidence) << ",-1,-1,-1\n";
    }
  }
}

SequenceData load_sequence(const std::filesystem::path& dir) {
  SequenceData data;
  data.dir = dir;
  data.info = read_seqinfo(dir / "seqinfo.ini");
  const auto gt_path = dir / "gt" / "gt.txt";
  const auto det_path = dir / "det" / "det.txt";
  if (std::filesystem::exists(gt_path)) {
    data.gt = parse_mot(gt_path, data.info);
    data.has_gt = true;
  }
  if (std::filesystem::exists(det_path)) {
    data.det = parse_mot(det_path, data.info);
    data.has_det = true;
  }
  data.gt.info = data.info;
  data.det.info = data.info;
  return data;
}

std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& root) {
  if (std::filesystem::exists(root / "seqinfo.ini")) return {root};
  if (!std::filesystem::is_directory(root)) throw FormatError("not a directory: " + root.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "seqinfo.ini")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_sequence(const std::filesystem::path& root, const Scene& gt, const Scene& det) {
  const auto dir = root / gt.info.name;
  std::filesystem::create_directories(dir / "gt");
  std::filesystem::create_directories(dir / "det");
  write_seqinfo(dir / "seqinfo.ini", gt.info);
  write_mot(gt, dir / "gt" / "gt.txt");
  write_mot(det, dir / "det" / "det.txt");
}

}  // namespace kinetrack

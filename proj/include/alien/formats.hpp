#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "alien/codec.hpp"
#include "alien/error.hpp"
#include "alien/evaluation.hpp"
#include "alien/geometry.hpp"
#include "alien/image.hpp"
#include "alien/io.hpp"
#include "alien/scene.hpp"
#include "alien/trainer.hpp"

namespace alien {

namespace detail {

inline std::string fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    fail(Errc::io_failure, context + ": bad number '" + s + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Truth files: header "x y hue sat val ori", one record per target, missing
// attributes written as "-".

inline std::string format_truth(const std::vector<TargetTruth>& targets) {
  std::string out = "x y hue sat val ori\n";
  for (const TargetTruth& t : targets) {
    out += detail::fixed4(t.x) + " " + detail::fixed4(t.y);
    if (t.has_attributes()) {
      out += " " + detail::fixed4(t.hue) + " " + detail::fixed4(t.saturation) + " " +
             detail::fixed4(t.value) + " " + detail::fixed4(t.orientation);
    } else {
      out += " - - - -";
    }
    out += "\n";
  }
  return out;
}

inline void write_truth(const std::vector<TargetTruth>& targets,
                        const std::filesystem::path& path) {
  atomic_write(path, format_truth(targets));
}

inline std::vector<TargetTruth> read_truth(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || detail::split_ws(line) !=
      std::vector<std::string>{"x", "y", "hue", "sat", "val", "ori"})
    fail(Errc::io_failure, path.string() + ": missing truth header");
  std::vector<TargetTruth> out;
  while (std::getline(in, line)) {
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 6) fail(Errc::io_failure, path.string() + ": bad truth record");
    if (tok[2] == "-") {
      out.push_back(TargetTruth::position_only(
          detail::parse_double(tok[0], path.string()),
          detail::parse_double(tok[1], path.string())));
      continue;
    }
    TargetTruth t;
    t.x = detail::parse_double(tok[0], path.string());
    t.y = detail::parse_double(tok[1], path.string());
    t.hue = detail::parse_double(tok[2], path.string());
    t.saturation = detail::parse_double(tok[3], path.string());
    t.value = detail::parse_double(tok[4], path.string());
    t.orientation = detail::parse_double(tok[5], path.string());
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detection files: header
// "x y conf hue sat val ori cell_row cell_col anchor", floats with 4 decimal
// places.

inline std::string format_detections(const std::vector<Detection>& dets) {
  std::string out = "x y conf hue sat val ori cell_row cell_col anchor\n";
  for (const Detection& d : dets) {
    out += detail::fixed4(d.x) + " " + detail::fixed4(d.y) + " " +
           detail::fixed4(d.confidence) + " " + detail::fixed4(d.hue) + " " +
           detail::fixed4(d.saturation) + " " + detail::fixed4(d.value) + " " +
           detail::fixed4(d.orientation) + " " + std::to_string(d.cell.row) + " " +
           std::to_string(d.cell.col) + " " + std::to_string(d.anchor_index) + "\n";
  }
  return out;
}

inline void write_detections(const std::vector<Detection>& dets,
                             const std::filesystem::path& path) {
  atomic_write(path, format_detections(dets));
}

inline std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line))
    fail(Errc::io_failure, path.string() + ": empty detections file");
  std::vector<Detection> out;
  while (std::getline(in, line)) {
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 10)
      fail(Errc::io_failure, path.string() + ": bad detection record");
    Detection d;
    d.x = detail::parse_double(tok[0], path.string());
    d.y = detail::parse_double(tok[1], path.string());
    d.confidence = detail::parse_double(tok[2], path.string());
    d.hue = detail::parse_double(tok[3], path.string());
    d.saturation = detail::parse_double(tok[4], path.string());
    d.value = detail::parse_double(tok[5], path.string());
    d.orientation = detail::parse_double(tok[6], path.string());
    d.cell.row = static_cast<int>(detail::parse_double(tok[7], path.string()));
    d.cell.col = static_cast<int>(detail::parse_double(tok[8], path.string()));
    d.anchor_index = static_cast<int>(detail::parse_double(tok[9], path.string()));
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Overlay plot data: detection centers, heading segments (fixed 15 px
// half-length, front endpoint first) and the RGB color decoded from HSV.

inline constexpr double kOverlaySegmentHalfLength = 15.0;

inline std::string format_overlay(const std::vector<Detection>& dets) {
  std::string out = "x y x1 y1 x2 y2 r g b\n";
  for (const Detection& d : dets) {
    const Vec2 dir = heading_direction(d.orientation);
    const double x1 = d.x + kOverlaySegmentHalfLength * dir.x;
    const double y1 = d.y + kOverlaySegmentHalfLength * dir.y;
    const double x2 = d.x - kOverlaySegmentHalfLength * dir.x;
    const double y2 = d.y - kOverlaySegmentHalfLength * dir.y;
    const Rgb c = hsv_to_rgb(d.hue, d.saturation, d.value);
    out += detail::fixed4(d.x) + " " + detail::fixed4(d.y) + " " + detail::fixed4(x1) +
           " " + detail::fixed4(y1) + " " + detail::fixed4(x2) + " " +
           detail::fixed4(y2) + " " + std::to_string(quantize8(c.r)) + " " +
           std::to_string(quantize8(c.g)) + " " + std::to_string(quantize8(c.b)) + "\n";
  }
  return out;
}

inline void write_overlay(const std::vector<Detection>& dets,
                          const std::filesystem::path& path) {
  atomic_write(path, format_overlay(dets));
}

// Rasterizes detection dots and heading segments onto a copy of the image.
inline Image render_overlay(const Image& image, const std::vector<Detection>& dets) {
  Image out = image;
  auto put = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= out.width || y >= out.height) return;
    std::uint8_t* px = out.pixel(y, x);
    px[0] = r;
    px[1] = g;
    px[2] = b;
  };
  for (const Detection& d : dets) {
    const Rgb c = hsv_to_rgb(d.hue, d.saturation, d.value);
    const std::uint8_t cr = quantize8(c.r), cg = quantize8(c.g), cb = quantize8(c.b);
    const Vec2 dir = heading_direction(d.orientation);
    const int steps = static_cast<int>(2 * kOverlaySegmentHalfLength);
    for (int s = 0; s <= steps; ++s) {
      const double t = s - kOverlaySegmentHalfLength;
      put(static_cast<int>(std::lround(d.x + t * dir.x)),
          static_cast<int>(std::lround(d.y + t * dir.y)), cr, cg, cb);
    }
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        put(static_cast<int>(std::lround(d.x)) + dx,
            static_cast<int>(std::lround(d.y)) + dy, 255, 0, 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training history log: one line per epoch.

inline std::string format_history(const TrainHistory& history) {
  std::string out =
      "epoch loss exist dx dy hue_sin hue_cos sat val ori_sin ori_cos wall_s\n";
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const EpochRecord& r = history.epochs[e];
    out += std::to_string(e + 1) + " " + detail::fixed4(r.mean_loss);
    for (double f : r.per_feature) out += " " + detail::fixed4(f);
    out += " " + detail::fixed4(r.wall_seconds) + "\n";
  }
  return out;
}

inline void write_history(const TrainHistory& history,
                          const std::filesystem::path& path) {
  atomic_write(path, format_history(history));
}

// ---------------------------------------------------------------------------
// Evaluation report, human block followed by a machine-readable
// "metric value" block.

inline std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "true detections: " << r.tp << " of " << (r.tp + r.fn) << " ("
      << detail::fixed4(100.0 * r.true_detection_rate) << "%)\n"
      << "false alarms:    " << r.fp << " ("
      << detail::fixed4(100.0 * r.false_alarm_rate) << "% of truth)\n"
      << "f1 score:        " << detail::fixed4(r.f1_score) << "\n"
      << "localization:    " << detail::fixed4(r.localization_rmse) << " px rmse ("
      << detail::fixed4(r.localization_mse) << " px^2 mse)\n";
  if (r.has_attribute_metrics) {
    out << "hue error:       " << detail::fixed4(r.hue_mae) << " deg\n"
        << "orientation err: " << detail::fixed4(r.orientation_mae) << " deg\n";
  } else {
    out << "hue error:       n/a (truth has no attributes)\n"
        << "orientation err: n/a (truth has no attributes)\n";
  }
  out << "---\n"
      << "tp " << r.tp << "\n"
      << "fp " << r.fp << "\n"
      << "fn " << r.fn << "\n"
      << "true_detection_rate " << detail::fixed4(r.true_detection_rate) << "\n"
      << "false_alarm_rate " << detail::fixed4(r.false_alarm_rate) << "\n"
      << "precision " << detail::fixed4(r.precision) << "\n"
      << "f1 " << detail::fixed4(r.f1_score) << "\n"
      << "localization_rmse " << detail::fixed4(r.localization_rmse) << "\n"
      << "localization_mse " << detail::fixed4(r.localization_mse) << "\n";
  if (r.has_attribute_metrics) {
    out << "hue_mae " << detail::fixed4(r.hue_mae) << "\n"
        << "orientation_mae " << detail::fixed4(r.orientation_mae) << "\n";
  } else {
    out << "hue_mae -\norientation_mae -\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Config files: UTF-8 "section.key = value" lines, '#' comments.

inline std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                            const std::string& name) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::bad_config, name + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key.find('.') == std::string::npos)
      fail(Errc::bad_config,
           name + ":" + std::to_string(lineno) + ": keys are section.name");
    out[key] = value;
  }
  return out;
}

inline std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path) {
  return parse_config_text(read_file(path), path.string());
}

}  // namespace alien

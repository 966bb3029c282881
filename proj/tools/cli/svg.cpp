#include "cli/svg.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace keymotion::cli {

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> SplitFields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : f.substr(b, e - b + 1));
  }
  return out;
}

std::vector<JointTrack> Select(std::vector<JointTrack> all, const std::vector<std::string>& joints) {
  if (joints.empty()) return all;
  std::vector<JointTrack> out;
  for (const std::string& name : joints) {
    auto it = std::find_if(all.begin(), all.end(), [&](const JointTrack& t) { return t.name == name; });
    if (it == all.end()) throw ConfigError("plot: joint '" + name + "' not present in the input");
    out.push_back(std::move(*it));
  }
  return out;
}

}  // namespace

std::vector<JointTrack> ReadTracks(const std::filesystem::path& path, const std::vector<std::string>& joints) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<int, Vec3>>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> f = SplitFields(line);
    if (f.size() != 5 || f[0] == "frame") continue;
    try {
      const int frame = std::stoi(f[0]);
      const Vec3 p(std::stod(f[2]), std::stod(f[3]), std::stod(f[4]));
      if (!rows.count(f[1])) order.push_back(f[1]);
      rows[f[1]].emplace_back(frame, p);
    } catch (const std::logic_error&) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": malformed trajectory row");
    }
  }
  if (order.empty()) throw ConfigError(path.string() + ": no trajectory rows");
  std::vector<JointTrack> all;
  for (const std::string& name : order) {
    auto& r = rows[name];
    std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    JointTrack t{name, Matrix(static_cast<Eigen::Index>(r.size()), 3)};
    for (std::size_t i = 0; i < r.size(); ++i) t.points.row(static_cast<Eigen::Index>(i)) = r[i].second.transpose();
    all.push_back(std::move(t));
  }
  return Select(std::move(all), joints);
}

std::vector<JointTrack> TracksFromMotion(const MotionSequence& motion, const std::vector<std::string>& joints) {
  const Matrix global = GlobalJointPositions(motion);
  std::vector<JointTrack> all;
  for (int j = 0; j < motion.skeleton.joint_count; ++j) {
    all.push_back({motion.skeleton.names[j], global.middleCols(3 * j, 3)});
  }
  return Select(std::move(all), joints);
}

std::string RenderTrajectorySvg(const std::vector<JointTrack>& tracks, const TargetPath* target,
                                const PlotOptions& options) {
  Require(!tracks.empty(), "plot: no trajectories to draw");
  for (const JointTrack& t : tracks) {
    Require(t.points.rows() >= 1 && t.points.cols() == 3, "plot: empty trajectory for joint " + t.name);
  }
  Require(options.width >= 100 && options.height >= 100, "plot: canvas must be at least 100 x 100");

  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_z = min_x, max_z = -min_x;
  auto extend = [&](const Matrix& pts) {
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      min_x = std::min(min_x, pts(i, 0));
      max_x = std::max(max_x, pts(i, 0));
      min_z = std::min(min_z, pts(i, 2));
      max_z = std::max(max_z, pts(i, 2));
    }
  };
  for (const JointTrack& t : tracks) extend(t.points);
  if (target != nullptr) extend(target->points);

  const double margin = 40.0;
  const double legend_width = 150.0;
  const double plot_w = options.width - 2 * margin - legend_width;
  const double plot_h = options.height - 2 * margin;
  const double span = std::max({max_x - min_x, max_z - min_z, 1e-9});
  const double scale = std::min(plot_w, plot_h) / span;
  auto px = [&](double x) { return margin + (x - min_x) * scale; };
  auto pz = [&](double z) { return margin + (z - min_z) * scale; };
  auto points_attr = [&](const Matrix& pts) {
    std::string s;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      if (i > 0) s += ' ';
      s += Fixed(px(pts(i, 0))) + ',' + Fixed(pz(pts(i, 2)));
    }
    return s;
  };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << ' ' << options.height << "\">\n"
      << "<style>\n"
      << ".trajectory { fill: none; stroke-width: 2; }\n"
      << ".tick { stroke: none; }\n"
      << ".target-path { fill: none; stroke: #000000; stroke-width: 2; stroke-dasharray: 6 4; }\n"
      << ".legend text { font-family: sans-serif; font-size: 12px; }\n"
      << "</style>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!options.title.empty()) {
    out << "<text x=\"" << Fixed(margin) << "\" y=\"" << Fixed(margin / 2)
        << "\" font-family=\"sans-serif\" font-size=\"14px\">" << Escape(options.title) << "</text>\n";
  }
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    const JointTrack& t = tracks[k];
    const char* color = kPalette[k % kPalette.size()];
    out << "<g id=\"joint-" << Escape(t.name) << "\">\n"
        << "<polyline class=\"trajectory\" stroke=\"" << color << "\" points=\"" << points_attr(t.points) << "\"/>\n";
    for (Eigen::Index i = 0; i < t.points.rows(); ++i) {
      out << "<circle class=\"tick\" fill=\"" << color << "\" cx=\"" << Fixed(px(t.points(i, 0))) << "\" cy=\""
          << Fixed(pz(t.points(i, 2))) << "\" r=\"2\"/>\n";
    }
    out << "</g>\n";
  }
  if (target != nullptr) {
    out << "<polyline class=\"target-path\" points=\"" << points_attr(target->points) << "\"/>\n";
  }

  const double lx = options.width - legend_width - margin / 2;
  out << "<g class=\"legend\">\n";
  double ly = margin;
  for (std::size_t k = 0; k < tracks.size(); ++k, ly += 18) {
    out << "<rect x=\"" << Fixed(lx) << "\" y=\"" << Fixed(ly - 9) << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[k % kPalette.size()] << "\"/>\n"
        << "<text x=\"" << Fixed(lx + 18) << "\" y=\"" << Fixed(ly + 2) << "\">" << Escape(tracks[k].name)
        << "</text>\n";
  }
  if (target != nullptr) {
    out << "<line x1=\"" << Fixed(lx) << "\" y1=\"" << Fixed(ly - 3) << "\" x2=\"" << Fixed(lx + 12) << "\" y2=\""
        << Fixed(ly - 3) << "\" stroke=\"#000000\" stroke-dasharray=\"3 2\"/>\n"
        << "<text x=\"" << Fixed(lx + 18) << "\" y=\"" << Fixed(ly + 2) << "\">target path ("
        << Escape(std::string(KeyjointName(target->keyjoint))) << ")</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace keymotion::cli

#ifndef KEYMOTION_TOOLS_SVG_HPP_
#define KEYMOTION_TOOLS_SVG_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "keymotion/implicit.hpp"
#include "keymotion/motion.hpp"

namespace keymotion::cli {

struct JointTrack {
  std::string name;
  Matrix points;  // F x 3, global
};

struct PlotOptions {
  int width = 800;
  int height = 800;
  std::string title;
};

// Rows `frame, joint_name, x, y, z` (motion CSVs and control files); other
// rows are skipped. Only `joints` are kept, in that order; an empty list keeps
// every joint in order of first appearance.
std::vector<JointTrack> ReadTracks(const std::filesystem::path& path, const std::vector<std::string>& joints);
std::vector<JointTrack> TracksFromMotion(const MotionSequence& motion, const std::vector<std::string>& joints);

// Top-down view (x right, z down the page): one polyline per track with a
// circle per frame, the target path as a dashed overlay, and a legend.
std::string RenderTrajectorySvg(const std::vector<JointTrack>& tracks, const TargetPath* target,
                                const PlotOptions& options);

}  // namespace keymotion::cli

#endif  // KEYMOTION_TOOLS_SVG_HPP_

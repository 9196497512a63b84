#pragma once

#include <map>
#include <string>

#include "isac/engine.hpp"

namespace isac {

/// Stable textual form of a config; hashed into the manifest for replay.
std::string config_canonical(const RunConfig& cfg);

std::string losses_csv(const RunRecord& rec);

/// Writes losses.csv, image.ppm, manifest.txt, gt.txt (when the backend has
/// ground truth) and any requested tensor dumps under out_dir. All files go
/// through write-temp-then-rename.
void write_run_artifacts(const RunConfig& cfg, const RunRecord& rec, const std::string& out_dir);

/// manifest.txt is sorted `key=value` lines.
std::map<std::string, std::string> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::map<std::string, std::string>& kv);

/// gt.txt round trip: one line per instance.
std::string ground_truth_text(const SceneSpec& gt);
SceneSpec parse_ground_truth(const std::string& text);

}  // namespace isac

#pragma once

#include <string>
#include <vector>

#include "tomo/driver.hpp"

namespace tomo {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Volumes and projection stacks are stored as raw little-endian float64 in
// x-fastest order plus a JSON sidecar (<base>.raw, <base>.json) describing
// extents, spacing, angles and roi. Round-trips are bit-exact.

void write_volume(const std::string& base, const Volume& v);
Volume read_volume(const std::string& base);

void write_projections(const std::string& base, const ProjectionStack& p);
ProjectionStack read_projections(const std::string& base);

// Alignment stacks as CSV: one row per projection, angles in radians,
// 17-significant-digit decimals.
void write_align_csv(const std::string& path, const AlignStack& est, const AlignStack* truth = nullptr);
AlignStack read_align_csv(const std::string& path);

/// Per-iteration metrics table; columns match the RunReport rows.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

/// Full run record: per-iteration metrics, final alignment, status flags and
/// the effective configuration echo (config_json may be empty).
void write_report_json(const std::string& path, const RunReport& report,
                       const std::string& config_json);
struct LoadedReport {
    std::vector<MetricsRow> rows;
    AlignStack final_align;
    bool stopped_by_increment = false;
    bool aborted = false;
    std::string abort_reason;
    std::string config_json;
};
LoadedReport read_report_json(const std::string& path);

/// Reproducibility manifest: effective config echo, a hash of it, and the
/// library version.
void write_manifest(const std::string& path, const std::string& config_json);

uint64_t fnv1a_hash(const std::string& text);

}  // namespace tomo

#pragma once

// JSON and CSV serialization for instances, estimates, region reports,
// coverage samples and trajectories. CSV files open with `# ` provenance
// lines; numbers are written in shortest round-trip form.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "tpr/dynamics.hpp"
#include "tpr/ensemble.hpp"
#include "tpr/landscape.hpp"
#include "tpr/tensor_ops.hpp"

namespace tpr {

using Json = nlohmann::ordered_json;

/// Relative tolerance used when re-validating measurements on load.
inline constexpr double kMeasurementTolerance = 1e-12;

Json instance_to_json(const ProblemInstance<double>& inst);
/// Rebuilds the instance and checks y_i against |<a_i, x_gt>|^2.
ProblemInstance<double> instance_from_json(const Json& doc);

Json estimate_to_json(const OpNormEstimate<double>& est);
Json region_report_to_json(const RegionReport<double>& rep);
Json certificate_to_json(const CertificateReport<double>& cert);

/// Columns x0..x{d-1}, r1, r2, r3, covered.
void write_coverage_csv(std::ostream& out, const CoverageResult<double>& cov, const Json& provenance);

/// Columns k (or t), loss, normalized_loss, orbit_dist_rel, certificate_margin.
void write_trajectory_csv(std::ostream& out, const Trajectory<double>& traj, Index m, bool time_column,
                          const Json& provenance);

/// `# tpr <version>` followed by `# config <compact json>`.
void write_provenance(std::ostream& out, const Json& provenance);

/// Shortest round-trip decimal form.
std::string format_number(double v);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& doc);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace tpr

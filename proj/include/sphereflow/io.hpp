// Serialization: coefficient CSV dumps, radial-graph sidecars, trajectory
// archives with a content fingerprint, and JSON reports. Doubles are printed
// with 17 significant digits so replays are bit-identical.
#pragma once

#include "sphereflow/analysis.hpp"
#include "sphereflow/arrival.hpp"
#include "sphereflow/centering.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace sphereflow::io {

using json = nlohmann::json;

std::string format_double(double v);

// Coefficient dump: header records n, k_max, Lambda and the normalization; rows
// are k,m,c.
void write_field_csv(const std::filesystem::path& path, const SpectralField& f);
SpectralField read_field_csv(const std::filesystem::path& path);

// RadialGraph: the coefficient CSV plus a JSON sidecar.
void write_radial_graph(const std::filesystem::path& csv_path, const RadialGraph& g,
                        const std::string& description, const std::string& timestamp = {});
RadialGraph read_radial_graph(const std::filesystem::path& csv_path);

// Trajectory archive: a directory of snapshot CSVs plus manifest.json carrying
// clock, dt, k_max, seeds and a content fingerprint over the snapshot bytes.
void write_archive(const std::filesystem::path& dir, const FlowTrajectory& traj,
                   const std::vector<std::uint64_t>& seeds);
FlowTrajectory read_archive(const std::filesystem::path& dir);
std::string archive_fingerprint(const std::filesystem::path& dir);

// FNV-1a 64-bit over a byte string, hex-encoded.
std::string fingerprint_bytes(const std::string& bytes);

json to_json(const SingularityReport& rep);
json to_json(const CenteringTransform& c);
json to_json(const ExtinctionEvent& e);
json to_json(const ThirdProbe& p);
json to_json(const HessianProbe& p);

void write_arrival_csv(const std::filesystem::path& path, const ArrivalSamples& samples);

}  // namespace sphereflow::io

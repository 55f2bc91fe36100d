#include "sphereflow/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sphereflow::io {

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << bytes;
}

std::string field_csv_body(const SpectralField& f) {
  std::ostringstream out;
  out << "# n=" << f.n << " k_max=" << f.k_max << " lambda=" << format_double(kQLambda)
      << " normalization=orthonormal-L2-sphere-sqrt2n\n";
  out << "k,m,c\n";
  for (int k = 0; k <= f.k_max; ++k)
    for (int m = -k; m <= k; ++m)
      out << k << ',' << m << ',' << format_double(f(k, m)) << '\n';
  return out.str();
}

SpectralField parse_field_csv(const std::string& body) {
  std::istringstream in(body);
  std::string line;
  int n = -1, k_max = -1;
  SpectralField f;
  bool sized = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        if (tok.rfind("n=", 0) == 0) n = std::stoi(tok.substr(2));
        if (tok.rfind("k_max=", 0) == 0) k_max = std::stoi(tok.substr(6));
      }
      continue;
    }
    if (line.rfind("k,", 0) == 0) continue;  // column header
    if (!sized) {
      if (n < 0 || k_max < 0) throw std::runtime_error("field csv: missing header");
      f = SpectralField(n, k_max);
      sized = true;
    }
    int k, m;
    double c;
    if (std::sscanf(line.c_str(), "%d,%d,%lf", &k, &m, &c) != 3)
      throw std::runtime_error("field csv: bad row '" + line + "'");
    f.at(k, m) = c;
  }
  if (!sized) throw std::runtime_error("field csv: no data rows");
  return f;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_field_csv(const std::filesystem::path& path, const SpectralField& f) {
  spit(path, field_csv_body(f));
}

SpectralField read_field_csv(const std::filesystem::path& path) {
  return parse_field_csv(slurp(path));
}

void write_radial_graph(const std::filesystem::path& csv_path, const RadialGraph& g,
                        const std::string& description, const std::string& timestamp) {
  write_field_csv(csv_path, g.profile);
  json side;
  side["n"] = g.n;
  side["description"] = description;
  side["timestamp"] = timestamp;
  std::filesystem::path jp = csv_path;
  jp.replace_extension(".json");
  spit(jp, side.dump(2) + "\n");
}

RadialGraph read_radial_graph(const std::filesystem::path& csv_path) {
  std::filesystem::path jp = csv_path;
  jp.replace_extension(".json");
  const json side = json::parse(slurp(jp));
  return RadialGraph(read_field_csv(csv_path), side.at("n").get<int>());
}

std::string fingerprint_bytes(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {
std::string snapshot_body(const Snapshot& s) {
  std::ostringstream out;
  out << "# time=" << format_double(s.time) << " center=" << format_double(s.center.x()) << ','
      << format_double(s.center.y()) << ',' << format_double(s.center.z()) << '\n';
  out << field_csv_body(s.profile);
  return out.str();
}
}  // namespace

void write_archive(const std::filesystem::path& dir, const FlowTrajectory& traj,
                   const std::vector<std::uint64_t>& seeds) {
  std::filesystem::create_directories(dir);
  std::string all_bytes;
  json times = json::array();
  for (size_t i = 0; i < traj.snapshots.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "snap_%06zu.csv", i);
    const std::string body = snapshot_body(traj.snapshots[i]);
    spit(dir / name, body);
    all_bytes += body;
    times.push_back(traj.snapshots[i].time);
  }
  json manifest;
  manifest["clock"] = traj.clock == FlowClock::Rescaled ? "rescaled" : "unrescaled";
  manifest["n"] = traj.n;
  manifest["k_max"] = traj.k_max;
  manifest["dt"] = traj.dt;
  manifest["snapshot_every"] = traj.snapshot_every;
  manifest["symmetry"] = traj.symmetry == SymmetryTag::Tetrahedral ? "tetrahedral" : "none";
  manifest["snapshot_count"] = traj.snapshots.size();
  manifest["times"] = times;
  manifest["seeds"] = seeds;
  manifest["content_hash"] = fingerprint_bytes(all_bytes);
  if (traj.stop) {
    manifest["stop"] = {{"reason", traj.stop->reason}, {"time", traj.stop->time}};
  }
  spit(dir / "manifest.json", manifest.dump(2) + "\n");
}

FlowTrajectory read_archive(const std::filesystem::path& dir) {
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  FlowTrajectory traj;
  traj.clock = manifest.at("clock").get<std::string>() == "rescaled" ? FlowClock::Rescaled
                                                                     : FlowClock::Unrescaled;
  traj.n = manifest.at("n").get<int>();
  traj.k_max = manifest.at("k_max").get<int>();
  traj.dt = manifest.at("dt").get<double>();
  traj.snapshot_every = manifest.at("snapshot_every").get<double>();
  traj.symmetry = manifest.value("symmetry", "none") == "tetrahedral" ? SymmetryTag::Tetrahedral
                                                                      : SymmetryTag::None;
  if (manifest.contains("stop"))
    traj.stop = StopInfo{manifest["stop"].at("reason").get<std::string>(),
                         manifest["stop"].at("time").get<double>()};
  const size_t count = manifest.at("snapshot_count").get<size_t>();
  for (size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "snap_%06zu.csv", i);
    const std::string body = slurp(dir / name);
    Snapshot s;
    const size_t eol = body.find('\n');
    std::istringstream hs(body.substr(1, eol));
    std::string tok;
    while (hs >> tok) {
      if (tok.rfind("time=", 0) == 0) s.time = std::stod(tok.substr(5));
      if (tok.rfind("center=", 0) == 0) {
        const std::string c = tok.substr(7);
        std::sscanf(c.c_str(), "%lf,%lf,%lf", &s.center.x(), &s.center.y(), &s.center.z());
      }
    }
    s.profile = parse_field_csv(body.substr(eol + 1));
    traj.snapshots.push_back(std::move(s));
  }
  return traj;
}

std::string archive_fingerprint(const std::filesystem::path& dir) {
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  return manifest.at("content_hash").get<std::string>();
}

json to_json(const SingularityReport& rep) {
  json j;
  switch (rep.verdict) {
    case SingularityReport::Verdict::Slow: j["verdict"] = "slow"; break;
    case SingularityReport::Verdict::Fast: j["verdict"] = "fast"; break;
    case SingularityReport::Verdict::Indeterminate: j["verdict"] = "indeterminate"; break;
  }
  j["dominant_degree"] = rep.dominant_degree;
  j["decay_rate"] = rep.decay_rate;
  j["gap"] = rep.gap;
  j["window"] = {rep.window_begin, rep.window_end};
  j["residuals"] = {{"logfit_rms", rep.fit_residual}, {"plus_fraction", rep.plus_fraction_end}};
  if (!rep.reason.empty()) j["reason"] = rep.reason;
  json pk = json::array();
  if (rep.pk_coeffs.c.size() > 0) {
    const int k = rep.dominant_degree;
    for (int m = -k; m <= k; ++m) pk.push_back({k, m, rep.pk_coeffs(k, m)});
  }
  j["pk_coeffs"] = pk;
  return j;
}

json to_json(const CenteringTransform& c) {
  return json{{"alpha", c.alpha},
              {"translation", {c.translation.x(), c.translation.y(), c.translation.z()}},
              {"norm", c.norm()}};
}

json to_json(const ExtinctionEvent& e) {
  return json{{"point", {e.point.x(), e.point.y(), e.point.z()}},
              {"time", e.time},
              {"residual", e.residual}};
}

json to_json(const ThirdProbe& p) {
  json j;
  switch (p.verdict) {
    case ThirdProbe::Verdict::NotC3: j["verdict"] = "not-C3"; break;
    case ThirdProbe::Verdict::C3Consistent: j["verdict"] = "C3-consistent"; break;
    case ThirdProbe::Verdict::Inconclusive: j["verdict"] = "inconclusive"; break;
  }
  j["order"] = 3;
  j["ladder"] = p.radii;
  j["oscillation"] = p.oscillation;
  j["floor"] = p.floor;
  j["quotients"] = p.quotients;
  j["stopped_at"] = p.stopped_at;
  return j;
}

json to_json(const HessianProbe& p) {
  json j;
  j["order"] = 2;
  j["ladder"] = p.radii;
  j["deviation_from_limit"] = p.deviation_from_limit;
  j["verdict"] = p.consistent ? "C2-consistent" : "inconsistent";
  json hs = json::array();
  for (const auto& H : p.hessians) {
    json row = json::array();
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) row.push_back(H(i, k));
    hs.push_back(row);
  }
  j["hessians"] = hs;
  return j;
}

void write_arrival_csv(const std::filesystem::path& path, const ArrivalSamples& samples) {
  std::ostringstream out;
  out << "# vanishing_time=" << format_double(samples.event.time) << '\n';
  out << "x1,x2,x3,t\n";
  for (size_t i = 0; i < samples.points.size(); ++i) {
    const auto& p = samples.points[i];
    out << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z())
        << ',' << format_double(samples.times[i]) << '\n';
  }
  spit(path, out.str());
}

}  // namespace sphereflow::io

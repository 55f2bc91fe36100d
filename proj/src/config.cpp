#include "sphereflow/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sphereflow {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Split a bracketed array at top-level commas: "[1, [2,3], 4]" -> {"1","[2,3]","4"}.
std::vector<std::string> split_array(const std::string& v) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw std::invalid_argument("config: expected an array, got '" + v + "'");
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (size_t i = 1; i + 1 < v.size(); ++i) {
    const char c = v[i];
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

double as_double(const std::string& v) {
  size_t used = 0;
  const double d = std::stod(v, &used);
  if (trim(v.substr(used)) != "")
    throw std::invalid_argument("config: bad number '" + v + "'");
  return d;
}

std::vector<PerturbationSpec::Mode> parse_modes(const std::string& v) {
  std::vector<PerturbationSpec::Mode> modes;
  for (const std::string& item : split_array(v)) {
    const auto parts = split_array(item);
    if (parts.size() != 3)
      throw std::invalid_argument("config: mode entries are [k, m, weight]");
    modes.push_back({static_cast<int>(as_double(parts[0])),
                     static_cast<int>(as_double(parts[1])), as_double(parts[2])});
  }
  return modes;
}

}  // namespace

void ExperimentConfig::apply(const std::string& text) {
  ExperimentConfig& cfg = *this;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key =
        (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);

    if (key == "n") cfg.n = static_cast<int>(as_double(value));
    else if (key == "k_max") cfg.k_max = static_cast<int>(as_double(value));
    else if (key == "dt") cfg.dt = as_double(value);
    else if (key == "mcf_dt") cfg.mcf_dt = as_double(value);
    else if (key == "horizon") cfg.horizon = as_double(value);
    else if (key == "snapshot_every") cfg.snapshot_every = as_double(value);
    else if (key == "mcf_stop_inradius") cfg.mcf_stop_inradius = as_double(value);
    else if (key == "workers") cfg.workers = static_cast<int>(as_double(value));
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& s : split_array(value))
        cfg.seeds.push_back(static_cast<std::uint64_t>(as_double(s)));
    } else if (key == "base.amplitude") cfg.base.amplitude = as_double(value);
    else if (key == "base.modes") cfg.base.modes = parse_modes(value);
    else if (key == "base.random_degrees") {
      const auto parts = split_array(value);
      cfg.base.modes.clear();
      cfg.base.random_k_lo = static_cast<int>(as_double(parts.at(0)));
      cfg.base.random_k_hi = static_cast<int>(as_double(parts.at(1)));
    } else if (key == "perturbation.amplitude") cfg.perturbation.amplitude = as_double(value);
    else if (key == "perturbation.modes") cfg.perturbation.modes = parse_modes(value);
    else if (key == "perturbation.random_degrees") {
      const auto parts = split_array(value);
      cfg.perturbation.modes.clear();
      cfg.perturbation.random_k_lo = static_cast<int>(as_double(parts.at(0)));
      cfg.perturbation.random_k_hi = static_cast<int>(as_double(parts.at(1)));
    } else if (key == "tolerances.rate") cfg.rate_tolerance = as_double(value);
    else if (key == "tolerances.dominance") cfg.dominance_factor = as_double(value);
    else if (key == "design.time") cfg.design_time = as_double(value);
    else if (key == "design.k_max") cfg.design_k_max = static_cast<int>(as_double(value));
    else if (key == "design.dt") cfg.design_dt = as_double(value);
    else if (key == "design.epsilon") cfg.design_epsilon = as_double(value);
    else
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  ExperimentConfig cfg;
  cfg.apply(text);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

std::string ExperimentConfig::print() const {
  std::ostringstream out;
  const auto modes_str = [](const std::vector<PerturbationSpec::Mode>& ms) {
    std::ostringstream s;
    s << '[';
    for (size_t i = 0; i < ms.size(); ++i) {
      s << '[' << ms[i].k << ", " << ms[i].m << ", " << ms[i].weight << ']';
      if (i + 1 < ms.size()) s << ", ";
    }
    s << ']';
    return s.str();
  };
  out << "# dimension (transforms support n = 2) and band limit (<= 32)\n";
  out << "n = " << n << "\nk_max = " << k_max << "\n";
  out << "# rescaled-flow step in (0, 0.01]; unrescaled step in (0, 1e-3]\n";
  out << "dt = " << dt << "\nmcf_dt = " << mcf_dt << "\n";
  out << "horizon = " << horizon << "\nsnapshot_every = " << snapshot_every << "\n";
  out << "mcf_stop_inradius = " << mcf_stop_inradius << "\n";
  out << "workers = " << workers << "\n";
  out << "output_dir = \"" << output_dir.string() << "\"\n";
  out << "seeds = [";
  for (size_t i = 0; i < seeds.size(); ++i) out << seeds[i] << (i + 1 < seeds.size() ? ", " : "");
  out << "]\n\n[base]\n";
  out << "amplitude = " << base.amplitude << "\n";
  if (!base.modes.empty())
    out << "modes = " << modes_str(base.modes) << "\n";
  else
    out << "random_degrees = [" << base.random_k_lo << ", " << base.random_k_hi << "]\n";
  out << "\n[perturbation]\n";
  out << "amplitude = " << perturbation.amplitude << "\n";
  if (!perturbation.modes.empty())
    out << "modes = " << modes_str(perturbation.modes) << "\n";
  else
    out << "random_degrees = [" << perturbation.random_k_lo << ", " << perturbation.random_k_hi
        << "]\n";
  out << "\n[tolerances]\n";
  out << "rate = " << rate_tolerance << "\ndominance = " << dominance_factor << "\n";
  out << "\n[design]\n";
  out << "time = " << design_time << "\nk_max = " << design_k_max << "\ndt = " << design_dt
      << "\nepsilon = " << design_epsilon << "\n";
  return out.str();
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (n != 2) fail("n must be 2 (transforms are implemented for n = 2 only)");
  if (k_max < 2 || k_max > 32) fail("k_max must lie in [2, 32]");
  if (!(dt > 0 && dt <= 0.01)) fail("dt must lie in (0, 0.01]");
  if (!(mcf_dt > 0 && mcf_dt <= 1e-3)) fail("mcf_dt must lie in (0, 1e-3]");
  if (!(horizon > 0 && horizon <= 50)) fail("horizon must lie in (0, 50]");
  if (!(snapshot_every >= dt)) fail("snapshot_every must be at least dt");
  if (!(mcf_stop_inradius > 0.01 && mcf_stop_inradius < 1.0))
    fail("mcf_stop_inradius must lie in (0.01, 1)");
  if (seeds.empty()) fail("seeds must be explicit (no ambient randomness)");
  if (workers < 1 || workers > 64) fail("workers must lie in [1, 64]");
  if (!(base.amplitude >= 0 && base.amplitude < 0.3)) fail("base.amplitude out of range [0, 0.3)");
  if (!(perturbation.amplitude >= 0 && perturbation.amplitude < 0.3))
    fail("perturbation.amplitude out of range [0, 0.3)");
  if (!(rate_tolerance > 0 && rate_tolerance < 0.5)) fail("tolerances.rate out of range");
  if (!(dominance_factor > 1.0)) fail("tolerances.dominance must exceed 1");
  if (design_k_max < 4 || design_k_max > k_max) fail("design.k_max must lie in [4, k_max]");
  if (!(design_dt > 0 && design_dt <= 0.01)) fail("design.dt must lie in (0, 0.01]");
  if (!(design_time > 0 && design_time <= 20)) fail("design.time must lie in (0, 20]");
  if (!(design_epsilon > 0 && design_epsilon < 0.1)) fail("design.epsilon out of range");
}

}  // namespace sphereflow

#include "facecorr/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "facecorr/geometry.hpp"

namespace fc {

namespace {

struct Entry {
  const char* key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"delta", [](PipelineConfig& c, const std::string& v) { c.delta = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.delta); }},
      {"subsample_step",
       [](PipelineConfig& c, const std::string& v) { c.subsample_step = std::stoi(v); },
       [](const PipelineConfig& c) { return std::to_string(c.subsample_step); }},
      {"t_k", [](PipelineConfig& c, const std::string& v) { c.t_k = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.t_k); }},
      {"k_q_mult", [](PipelineConfig& c, const std::string& v) { c.k_q_mult = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.k_q_mult); }},
      {"n_q", [](PipelineConfig& c, const std::string& v) { c.n_q = std::stoi(v); },
       [](const PipelineConfig& c) { return std::to_string(c.n_q); }},
      {"t_1", [](PipelineConfig& c, const std::string& v) { c.t_1 = std::stoi(v); },
       [](const PipelineConfig& c) { return std::to_string(c.t_1); }},
      {"max_iters", [](PipelineConfig& c, const std::string& v) { c.max_iters = std::stoi(v); },
       [](const PipelineConfig& c) { return std::to_string(c.max_iters); }},
      {"dedup_mult", [](PipelineConfig& c, const std::string& v) { c.dedup_mult = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.dedup_mult); }},
      {"t_a", [](PipelineConfig& c, const std::string& v) { c.t_a = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.t_a); }},
      {"lambda", [](PipelineConfig& c, const std::string& v) { c.lambda = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.lambda); }},
      {"eps_f", [](PipelineConfig& c, const std::string& v) { c.eps_f = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.eps_f); }},
      {"fit_max_iters",
       [](PipelineConfig& c, const std::string& v) { c.fit_max_iters = std::stoi(v); },
       [](const PipelineConfig& c) { return std::to_string(c.fit_max_iters); }},
      {"energy_retain",
       [](PipelineConfig& c, const std::string& v) { c.energy_retain = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.energy_retain); }},
      {"crop_radius", [](PipelineConfig& c, const std::string& v) { c.crop_radius = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.crop_radius); }},
      {"grid_spacing",
       [](PipelineConfig& c, const std::string& v) { c.grid_spacing = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.grid_spacing); }},
      {"smoothing_weight",
       [](PipelineConfig& c, const std::string& v) { c.smoothing_weight = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.smoothing_weight); }},
      {"pose_max_iters",
       [](PipelineConfig& c, const std::string& v) { c.pose_max_iters = std::stoi(v); },
       [](const PipelineConfig& c) { return std::to_string(c.pose_max_iters); }},
      {"full_preprocess",
       [](PipelineConfig& c, const std::string& v) { c.full_preprocess = std::stoi(v) != 0; },
       [](const PipelineConfig& c) { return std::to_string(c.full_preprocess ? 1 : 0); }},
      {"warp_magnitude",
       [](PipelineConfig& c, const std::string& v) { c.warp_magnitude = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.warp_magnitude); }},
      {"family_n", [](PipelineConfig& c, const std::string& v) { c.family_n = std::stoi(v); },
       [](const PipelineConfig& c) { return std::to_string(c.family_n); }},
      {"template_spacing",
       [](PipelineConfig& c, const std::string& v) { c.template_spacing = std::stod(v); },
       [](const PipelineConfig& c) { return fmt_double(c.template_spacing); }},
      {"seed", [](PipelineConfig& c, const std::string& v) { c.seed = std::stoull(v); },
       [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      {"threads", [](PipelineConfig& c, const std::string& v) { c.threads = std::stoi(v); },
       [](const PipelineConfig& c) { return std::to_string(c.threads); }},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  const auto end = s.find_last_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_override(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (key == e.key) {
      try {
        e.set(cfg, value);
      } catch (const std::exception&) {
        throw Error("invalid value for config key '" + key + "': " + value);
      }
      return;
    }
  }
  throw Error("unknown config key: " + key);
}

PipelineConfig load_config(const std::string& path, const PipelineConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  PipelineConfig cfg = base;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(path + ":" + std::to_string(lineno) + ": expected key=value");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string dump_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += std::string(e.key) + "=" + e.get(cfg) + "\n";
  return out;
}

}  // namespace fc

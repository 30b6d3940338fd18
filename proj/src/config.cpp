#include "stratostab/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

namespace stratostab {

namespace {

std::string trim(const std::string& s) {
  auto b = s.begin(), e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return std::string(b, e);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

double to_double(const std::string& v, const std::string& where) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(where + ": expected a number, got '" + v + "'");
  return out;
}

long to_long(const std::string& v, const std::string& where) {
  std::size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return out;
}

}  // namespace

std::map<std::string, std::map<std::string, std::string>> parse_sections(
    const std::string& text, const std::string& origin) {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::istringstream in(text);
  std::string line, section;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
      sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    sections[section][key] = value;
  }
  return sections;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  const auto sections = parse_sections(text, origin);
  ExperimentConfig cfg;

  auto get = [&](const std::string& sec, const std::string& key) -> std::optional<std::string> {
    const auto s = sections.find(sec);
    if (s == sections.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  };
  auto where = [&](const std::string& sec, const std::string& key) {
    return origin + ": [" + sec + "] " + key;
  };

  for (const auto& [sec, kv] : sections) {
    static const std::map<std::string, std::vector<std::string>> known = {
        {"model", {"kind", "n", "nu", "f", "c", "path"}},
        {"mask", {"lo", "hi"}},
        {"controller", {"kind", "target_rate", "sigma"}},
        {"sde", {"dt", "T", "paths", "seed"}},
        {"certify", {"gamma", "window"}},
        {"output", {"directory", "formats"}},
    };
    const auto it = known.find(sec);
    if (it == known.end()) throw ConfigError(origin + ": unknown section [" + sec + "]");
    for (const auto& [key, value] : kv) {
      (void)value;
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw ConfigError(origin + ": unknown key '" + key + "' in section [" + sec + "]");
    }
  }

  if (auto v = get("model", "kind")) cfg.model_kind = *v;
  if (cfg.model_kind != "advection_diffusion" && cfg.model_kind != "matrix")
    throw ConfigError(where("model", "kind") + ": must be advection_diffusion or matrix");
  if (auto v = get("model", "n")) cfg.n = to_long(*v, where("model", "n"));
  if (auto v = get("model", "nu")) cfg.nu = to_double(*v, where("model", "nu"));
  if (auto v = get("model", "f")) cfg.f = to_double(*v, where("model", "f"));
  if (auto v = get("model", "c")) cfg.c = to_double(*v, where("model", "c"));
  if (auto v = get("model", "path")) cfg.matrix_path = *v;
  if (cfg.model_kind == "matrix" && cfg.matrix_path.empty())
    throw ConfigError(origin + ": [model] path required when kind = matrix");
  if (cfg.model_kind == "advection_diffusion") {
    if (cfg.n < 8) throw ConfigError(where("model", "n") + ": must be >= 8");
    if (cfg.nu <= 0.0) throw ConfigError(where("model", "nu") + ": must be > 0");
  }

  if (auto v = get("mask", "lo")) cfg.mask_lo = to_double(*v, where("mask", "lo"));
  if (auto v = get("mask", "hi")) cfg.mask_hi = to_double(*v, where("mask", "hi"));
  if (!(0.0 <= cfg.mask_lo && cfg.mask_lo < cfg.mask_hi && cfg.mask_hi <= 1.0))
    throw ConfigError(origin + ": [mask] requires 0 <= lo < hi <= 1");

  if (auto v = get("controller", "kind")) cfg.controller_kind = *v;
  if (cfg.controller_kind != "real" && cfg.controller_kind != "complex")
    throw ConfigError(where("controller", "kind") + ": must be real or complex");
  if (auto v = get("controller", "target_rate"))
    cfg.target_rate = to_double(*v, where("controller", "target_rate"));
  if (auto v = get("controller", "sigma"))
    cfg.sigma_override = to_double(*v, where("controller", "sigma"));
  if (!cfg.sigma_override && cfg.target_rate >= 0.0)
    throw ConfigError(where("controller", "target_rate") + ": must be negative");
  if (cfg.sigma_override && *cfg.sigma_override < 0.0)
    throw ConfigError(where("controller", "sigma") + ": must be >= 0");

  if (auto v = get("sde", "dt")) cfg.dt = to_double(*v, where("sde", "dt"));
  if (auto v = get("sde", "T")) cfg.horizon = to_double(*v, where("sde", "T"));
  if (cfg.horizon <= 0.0) throw ConfigError(where("sde", "T") + ": must be > 0");
  if (auto v = get("sde", "paths")) cfg.paths = static_cast<int>(to_long(*v, where("sde", "paths")));
  if (cfg.paths < 1) throw ConfigError(where("sde", "paths") + ": must be >= 1");
  if (auto v = get("sde", "seed")) {
    const long s = to_long(*v, where("sde", "seed"));
    if (s < 0) throw ConfigError(where("sde", "seed") + ": must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  }

  if (auto v = get("certify", "gamma")) cfg.gamma = to_double(*v, where("certify", "gamma"));
  if (auto v = get("certify", "window")) cfg.window = to_double(*v, where("certify", "window"));
  if (!(cfg.window > 0.0 && cfg.window <= 1.0))
    throw ConfigError(where("certify", "window") + ": must lie in (0, 1]");

  if (auto v = get("output", "directory")) cfg.output_dir = *v;
  if (auto v = get("output", "formats")) cfg.formats = *v;
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace stratostab

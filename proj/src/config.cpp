#include "sgid/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

#include "sgid/errors.hpp"

namespace sgid {

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw DomainError("config key " + key + ": '" + v + "' is not a number");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw DomainError("config key " + key + ": '" + v + "' is not a non-negative integer");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw DomainError("config key " + key + ": '" + v + "' is out of range");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DomainError("config key " + key + ": '" + v + "' is not a boolean");
}

struct Field {
  const char* key;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<nlohmann::json(const PipelineConfig&)> get;
};

#define SGID_DOUBLE(name, member)                                                                   \
  Field {                                                                                           \
    name, [](PipelineConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
        [](const PipelineConfig& c) { return nlohmann::json(c.member); }                            \
  }
#define SGID_UINT(name, member, type)                                                              \
  Field {                                                                                           \
    name, [](PipelineConfig& c, const std::string& k, const std::string& v) { c.member = static_cast<type>(to_uint(k, v)); }, \
        [](const PipelineConfig& c) { return nlohmann::json(c.member); }                            \
  }
#define SGID_BOOL(name, member)                                                                    \
  Field {                                                                                           \
    name, [](PipelineConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
        [](const PipelineConfig& c) { return nlohmann::json(c.member); }                            \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      SGID_UINT("n_samples", n_samples, std::size_t),
      SGID_DOUBLE("perturbation", perturbation),
      SGID_UINT("seed", seed, std::uint64_t),
      SGID_UINT("workers", workers, std::size_t),
      SGID_DOUBLE("grid.t_start", grid.t_start),
      SGID_DOUBLE("grid.t_end", grid.t_end),
      SGID_DOUBLE("grid.dt", grid.dt),
      SGID_DOUBLE("model.rtol", model_rtol),
      SGID_DOUBLE("model.atol", model_atol),
      Field{"model.iq_form",
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              if (v == "subtransient_d") c.iq_form = QAxisCurrent::subtransient_d;
              else if (v == "as_printed") c.iq_form = QAxisCurrent::as_printed;
              else throw DomainError("config key " + k + ": expected subtransient_d or as_printed");
            },
            [](const PipelineConfig& c) {
              return nlohmann::json(c.iq_form == QAxisCurrent::as_printed ? "as_printed" : "subtransient_d");
            }},
      SGID_DOUBLE("fim.step", fim_step),
      SGID_DOUBLE("fim.tol", fim_tol),
      SGID_DOUBLE("fim.cutoff", fim_cutoff),
      SGID_DOUBLE("fim.identifiable_threshold", identifiable_threshold),
      SGID_UINT("geodesic.depth", geodesic_depth, std::size_t),
      SGID_DOUBLE("geodesic.jacobian_step", geodesic.jacobian_step),
      SGID_DOUBLE("geodesic.curvature_step", geodesic.curvature_step),
      SGID_DOUBLE("geodesic.eigen_floor", geodesic.eigen_floor),
      SGID_DOUBLE("geodesic.log_bound", geodesic.log_bound),
      SGID_DOUBLE("geodesic.velocity_ratio", geodesic.velocity_ratio),
      SGID_DOUBLE("geodesic.tau_max", geodesic.tau_max),
      SGID_DOUBLE("geodesic.rtol", geodesic.rtol),
      SGID_DOUBLE("geodesic.atol", geodesic.atol),
      SGID_DOUBLE("geodesic.model_tol", geodesic_model_tol),
      SGID_DOUBLE("dmaps.epsilon_multiplier", dmaps_epsilon_multiplier),
      SGID_DOUBLE("dmaps.epsilon", dmaps_epsilon),
      SGID_UINT("dmaps.eigenpairs", dmaps_eigenpairs, std::size_t),
      SGID_DOUBLE("residuals.bandwidth_scale", residual_bandwidth_scale),
      SGID_UINT("residuals.target_dim", target_dim, std::size_t),
      SGID_DOUBLE("residuals.ambiguity_ratio", ambiguity_ratio),
      SGID_DOUBLE("gh.epsilon_multiplier", gh.epsilon_multiplier),
      SGID_BOOL("gh.squared_median", gh.squared_median),
      SGID_UINT("gh.retain", gh.gh.retain, std::size_t),
      SGID_DOUBLE("gh.delta", gh.gh.delta),
      SGID_BOOL("gh.delta_rule", gh.gh.delta_rule),
      SGID_DOUBLE("gh.train_fraction", gh.train_fraction),
      SGID_UINT("gh.split_seed", gh.split_seed, std::uint64_t),
  };
  return f;
}

#undef SGID_DOUBLE
#undef SGID_UINT
#undef SGID_BOOL

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, key, trim(value));
      return;
    }
  }
  throw DomainError("unknown config key '" + key + "'");
}

void PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DomainError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

std::vector<std::string> PipelineConfig::keys() const {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : fields()) j[f.key] = f.get(*this);
  return j;
}

std::size_t PipelineConfig::effective_workers() const {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

IntegrationOptions PipelineConfig::model_integration() const {
  IntegrationOptions o;
  o.rtol = model_rtol;
  o.atol = model_atol;
  o.settings.iq_form = iq_form;
  return o;
}

IntegrationOptions PipelineConfig::fim_integration() const {
  IntegrationOptions o = model_integration();
  o.rtol = o.atol = fim_tol;
  return o;
}

IntegrationOptions PipelineConfig::geodesic_integration() const {
  IntegrationOptions o = model_integration();
  o.rtol = o.atol = geodesic_model_tol;
  return o;
}

EnsembleSpec PipelineConfig::ensemble_spec() const {
  EnsembleSpec s;
  s.n_samples = n_samples;
  s.perturbation = perturbation;
  s.seed = seed;
  s.grid = grid;
  return s;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw NumericalError("SHA-256 initialization failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

void append_manifest(const std::filesystem::path& dir, const ManifestEntry& entry) {
  nlohmann::json j;
  j["stage"] = entry.stage;
  j["status"] = entry.status;
  j["version"] = kVersion;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream stamp;
  stamp << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  j["finished_at"] = stamp.str();
  j["seconds"] = entry.seconds;
  j["config"] = entry.config;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : entry.files) {
    if (!std::filesystem::exists(f)) throw DomainError("manifest lists missing file " + f.string());
    files.push_back({{"path", std::filesystem::relative(f, dir).generic_string()},
                     {"bytes", std::filesystem::file_size(f)},
                     {"sha256", sha256_file(f)}});
  }
  j["files"] = files;
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.jsonl", std::ios::app);
  if (!out) throw DomainError("cannot append to " + (dir / "manifest.jsonl").string());
  out << j.dump() << '\n';
}

}  // namespace sgid

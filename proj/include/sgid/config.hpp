#pragma once

// Key-value run configuration and the append-only run manifest.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgid/dmaps.hpp"
#include "sgid/geodesic.hpp"
#include "sgid/pipeline.hpp"

namespace sgid {

/// Every tunable of the command-line pipeline. Files hold `key = value`
/// lines; `#` starts a comment.
struct PipelineConfig {
  // ensemble
  std::size_t n_samples = 2000;
  double perturbation = 0.10;
  std::uint64_t seed = 1;
  std::size_t workers = 0;  // 0: hardware concurrency

  // model
  ObservationGrid grid;
  double model_rtol = 1e-7;
  double model_atol = 1e-7;
  QAxisCurrent iq_form = default_q_axis_current();

  // information geometry
  double fim_step = 1e-4;
  double fim_tol = 1e-9;
  double fim_cutoff = 1e-2;
  double identifiable_threshold = 0.8;
  std::size_t geodesic_depth = 0;
  GeodesicOptions geodesic = mbam_geodesic_options();
  double geodesic_model_tol = 1e-11;

  // manifold learning
  double dmaps_epsilon_multiplier = 7.0;
  double dmaps_epsilon = 0.0;  // > 0 overrides the median rule
  std::size_t dmaps_eigenpairs = 25;
  double residual_bandwidth_scale = 1.0 / 9.0;
  std::size_t target_dim = 0;  // 0: gap rule
  double ambiguity_ratio = 1.5;
  GhTrackOptions gh;

  /// Throws DomainError on an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  void load(const std::filesystem::path& path);
  std::vector<std::string> keys() const;
  nlohmann::json to_json() const;

  std::size_t effective_workers() const;
  IntegrationOptions model_integration() const;
  IntegrationOptions fim_integration() const;
  IntegrationOptions geodesic_integration() const;
  EnsembleSpec ensemble_spec() const;
};

/// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string stage;
  nlohmann::json config;
  std::vector<std::filesystem::path> files;
  double seconds = 0.0;
  std::string status = "ok";
};

/// Appends one JSON line to `dir/manifest.jsonl`, hashing every listed file.
/// Throws DomainError if a listed file is missing.
void append_manifest(const std::filesystem::path& dir, const ManifestEntry& entry);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace sgid

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gramridge/design.hpp"
#include "gramridge/family.hpp"
#include "gramridge/metrics.hpp"
#include "gramridge/optimize.hpp"
#include "gramridge/types.hpp"

namespace gramridge {

Family family_from_string(const std::string& name);
std::string family_name(Family f);

// Delimited numeric table: header row, first column sample id, comma or tab
// (autodetected). Missing or non-numeric cells are hard errors.
struct TableData {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Matrix values;
};
TableData read_table(const std::string& path);
void write_table(const std::string& path, const TableData& table, char delim = '\t');

struct BlockConfig {
  std::string name;
  std::string path;
  std::string role = "penalized";  // penalized | unpenalized
};

// Run description: a JSON config file plus command-line overrides.
struct RunConfig {
  std::vector<BlockConfig> blocks;
  std::string response_path;
  Family family = Family::linear;
  std::optional<std::pair<std::string, std::string>> paired;
  std::vector<std::string> preferred;
  std::string method = "cv";  // cv | ml | vb
  Criterion criterion = Criterion::cvl;
  int folds_k = 10;
  int repeats = 1;
  int outer_k = 3;
  std::uint64_t seed = 1;
  int workers = 1;
  TunerConfig tuner;
  std::string output_dir = ".";

  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
  std::string fingerprint() const;
};

struct IngestResult {
  BlockedDesign design;
  ResponseSpec response;
  std::vector<std::string> sample_ids;
};

// Reads and id-aligns every block against the response file's sample order.
IngestResult ingest(const RunConfig& config);

// Self-describing fitted-model file. Predictions from a reloaded artifact
// match the in-memory ones bit for bit.
struct FitArtifact {
  int format_version = 1;
  std::string config_fingerprint;
  std::string created;  // excluded from determinism comparisons
  std::string method = "cv";
  Family family = Family::linear;
  std::vector<std::string> block_names;
  Vector lambdas;
  double lambda3 = 0.0;
  Vector beta_unpen;
  std::vector<Vector> beta_blocks;
  Vector eta;
  std::optional<BaselineHazard> baseline;
  std::vector<EvalRecord> trace;

  void save(const std::string& path) const;
  static FitArtifact load(const std::string& path);

  // Linear predictors for blocks matched by name.
  Vector predict(const std::vector<Matrix>& blocks,
                 const Matrix* unpen = nullptr) const;
  // Family-scale transform of a linear predictor (probability / risk score).
  double response_scale(double eta_value) const;
};

}  // namespace gramridge

#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "synctl/td3.hpp"

namespace synctl {

// Resolved run configuration. Loaded from JSON with full key validation;
// defaults are echoed back into the output directory for provenance.
struct RunConfig {
  std::string family_path;
  Mode mode = Mode::kSolar;
  std::int64_t total_steps = 200000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3};
  std::string out_dir = "runs/out";
  std::vector<std::string> train_variants;  // empty = family train split
  std::int64_t checkpoint_every = 0;        // 0 = final checkpoint only
  Td3Config td3;
  NetConfig net;
  std::int64_t synergy_period = 50000;
  int dq_batch = 512;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);

  // out_dir resolved against the SYNERGY_CTL_OUT environment variable.
  std::string resolved_out_dir() const;
};

// CSV files start with a schema version line ("# schema: <name>/1"), then the
// column header, then rows. Floats print as %.12g for byte-stable output.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema,
            const std::string& header);
  void row(const std::vector<std::string>& cells);
  static std::string fmt(double v);
  static std::string fmt(std::int64_t v);

 private:
  std::ofstream out_;
};

struct SeedRunResult {
  std::uint64_t seed = 0;
  std::string dir;
  std::string checkpoint;
  double wall_seconds = 0.0;
};

// Trains one seed; writes metrics.csv, synergy.csv (synergy-aware modes),
// checkpoints, and config echo under <out>/seed_<seed>/.
SeedRunResult run_training_seed(const RunConfig& config, std::uint64_t seed);

// Full training command: every seed in config.seeds (or just seed_override).
int cmd_train(const RunConfig& config, std::optional<std::uint64_t> seed_override);

struct VariantEval {
  std::string variant;
  bool heldout = false;
  int n = 0;  // episodes (single checkpoint) or seeds (run aggregation)
  double mean_return = 0.0;
  double ci95 = 0.0;
};

// Deterministic evaluation of one checkpoint: no exploration noise, no buffer
// writes. Held-out variants receive morphology-only structures.
std::vector<VariantEval> evaluate_checkpoint(const std::string& checkpoint_path,
                                             const VariantFamily& family,
                                             const std::vector<std::string>& variant_ids,
                                             int episodes, std::uint64_t eval_seed);

// Mean return of uniform-random actions under the same protocol.
double random_policy_return(const VariantFamily& family, const std::string& variant_id,
                            int episodes, std::uint64_t eval_seed);

int cmd_eval(const std::string& checkpoint, const std::string& run_dir,
             const std::string& family_path, const std::string& split, int episodes,
             std::uint64_t eval_seed, const std::string& out_csv);

int cmd_cluster(const std::string& similarity_path, const std::string& morphology_path,
                const std::string& preference_csv, const ApOptions& options,
                const std::string& out_path);

int cmd_export_synergies(const std::string& run_dir);

struct RankCheckResult {
  int measured_rank = 0;
  int num_synergies = 0;
  int t_rank = 0;
  bool pass = false;
};

RankCheckResult rank_check(const std::string& checkpoint_path,
                           const VariantFamily& family, const std::string& variant_id,
                           int samples, const std::string& synergies_spec,
                           std::uint64_t eval_seed);

int cmd_rank_check(const std::string& checkpoint, const std::string& family_path,
                   const std::string& variant_id, int samples,
                   const std::string& synergies_spec);

// Loads a NetBundle plus per-robot structures from a checkpoint.
struct LoadedPolicy {
  std::unique_ptr<NetBundle> nets;
  std::map<std::string, SynergyStructure> structures;
  nlohmann::json meta;
};
LoadedPolicy load_policy(const std::string& checkpoint_path);

// Structure used when evaluating a robot the checkpoint never trained on.
SynergyStructure eval_structure(const LoadedPolicy& policy, const VariantFamily& family,
                                const std::string& variant_id);

void save_policy(const std::string& path, const NetBundle& nets,
                 const std::map<std::string, SynergyStructure>& structures,
                 const nlohmann::json& extra_meta);

}  // namespace synctl

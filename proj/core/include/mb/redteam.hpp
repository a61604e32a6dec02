#pragma once

// Defines, executes and scores attack scenarios across reasoner and defense
// configurations. Attack success is structural: rank position for branded
// whisper, leaked substrings for vault whisper. The cross-user leak oracle
// scans delivered messages independently of the agents' own accounting.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mb/agents.hpp"
#include "mb/script.hpp"
#include "mb/world.hpp"

namespace mb {

enum class AttackFamily { BrandedWhisper, VaultWhisper, CleanBaseline };

std::string_view to_string(AttackFamily f);
AttackFamily attack_family_from_string(std::string_view s);

struct InjectionPayload {
  std::string target_product_id;  // branded_whisper: a product description
  std::string target_slot;        // vault_whisper: a user utterance slot
  std::string payload_text;
  // Optional declared grammar class (rank_first, disclose_other_user,
  // override_constraint); when set, the payload text must actually parse
  // to that class or the scenario is rejected.
  std::string pattern_class;

  bool operator==(const InjectionPayload&) const = default;
};

struct RunConfig {
  std::string reasoner = "naive";
  bool defenses_on = false;
  std::vector<std::string> disabled_rules;

  std::string label() const { return reasoner + (defenses_on ? "-on" : "-off"); }
  bool operator==(const RunConfig&) const = default;
};

// The four standard cells: naive/off, naive/on, hardened/off, hardened/on.
std::vector<RunConfig> default_configs();

struct AttackScenario {
  std::string scenario_id;
  AttackFamily family = AttackFamily::CleanBaseline;
  std::string world_file;  // relative to the scenario file's directory
  std::string session_user_id;
  UserScript script;
  std::vector<InjectionPayload> payloads;
  RunConfig config;
  std::uint64_t seed = 1;

  // Parses and enforces the family/payload invariant: branded payloads
  // target product descriptions only, vault payloads target utterance slots
  // only, clean baselines carry none. Throws ScenarioError.
  static AttackScenario load(const std::filesystem::path& path);
  static AttackScenario from_json(std::string_view text, std::string_view origin = "<memory>");
  std::string to_json() const;
};

struct ScenarioResult {
  std::string scenario_id;
  AttackFamily family = AttackFamily::CleanBaseline;
  RunConfig config;
  std::uint64_t seed = 0;

  bool attack_success = false;
  std::string success_criterion;
  std::optional<int> observed_rank_of_target;
  std::optional<int> baseline_rank_of_target;
  std::vector<std::string> leaked_fields;
  std::vector<std::string> validator_denials;

  std::vector<std::string> ranking;
  std::int64_t total = 0;
  std::string receipt_id;
  std::string receipt_digest_hex;
  std::string chain_outcome;

  std::string audit_log_path;  // relative to the result file
  std::string error;           // nonempty when the cell failed to execute

  std::string to_json() const;
};

// Runs one scenario against a pre-loaded, payload-free world. Writes
// audit.jsonl, result.json and (for branded whisper) audit_baseline.jsonl
// into out_dir. Deterministic given (scenario, seed).
ScenarioResult run_scenario(const AttackScenario& scenario, const WorldStore& world,
                            const std::filesystem::path& out_dir);

// Convenience: loads the scenario and its world file from disk.
ScenarioResult run_scenario_file(const std::filesystem::path& scenario_path,
                                 const std::optional<RunConfig>& config_override,
                                 std::optional<std::uint64_t> seed_override,
                                 const std::filesystem::path& out_dir);

struct ResultMatrix {
  std::vector<ScenarioResult> cells;  // scenario-major, config-minor order
};

// Cross product of scenarios and configs; per-cell errors are recorded, not
// fatal. Cells land in out_dir/<scenario_id>__<config label>/.
ResultMatrix run_matrix(const std::vector<AttackScenario>& scenarios,
                        const std::vector<RunConfig>& configs,
                        const std::filesystem::path& out_dir);

// Stable, human-readable table; byte-identical when regenerated.
std::string emit_report(const ResultMatrix& matrix);

// Independent leak oracle: substrings of any non-subject UserRecord found in
// user-visible output or envelopes delivered to the shopping agent.
std::vector<std::string> scan_cross_user_leaks(const std::vector<std::string>& audit_lines,
                                               const WorldStore& world,
                                               std::string_view session_user);

}  // namespace mb

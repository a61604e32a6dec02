// mb — command-line entry point for the agent-payments red-team testbed.
//
// Subcommands:
//   run           execute one scenario file and write result + audit log
//   matrix        run scenarios across reasoner/defense configurations
//   verify        rebuild and verify the mandate chain from an audit log
//   repl          interactive session; your input replaces the script slots
//   corpus-check  run the injection detector over payload/clean corpora

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mb/agents.hpp"
#include "mb/defense.hpp"
#include "mb/errors.hpp"
#include "mb/mandate.hpp"
#include "mb/redteam.hpp"
#include "mb/world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("MB_OUT_DIR");
  return env != nullptr && *env != '\0' ? env : "mb-out";
}

mb::RunConfig config_from_label(const std::string& label) {
  mb::RunConfig cfg;
  auto dash = label.rfind('-');
  if (dash == std::string::npos) {
    throw mb::Error("config label must look like naive-off or hardened-on: " + label);
  }
  cfg.reasoner = label.substr(0, dash);
  const std::string defenses = label.substr(dash + 1);
  if (defenses != "on" && defenses != "off") {
    throw mb::Error("config label defenses part must be on or off: " + label);
  }
  cfg.defenses_on = defenses == "on";
  if (cfg.reasoner != "naive" && cfg.reasoner != "hardened") {
    throw mb::Error("config label reasoner part must be naive or hardened: " + label);
  }
  return cfg;
}

void print_result_summary(const mb::ScenarioResult& r) {
  std::cout << r.scenario_id << " [" << r.config.label() << "] attack_success="
            << (r.attack_success ? "true" : "false");
  if (r.observed_rank_of_target) {
    std::cout << " rank=" << *r.observed_rank_of_target;
  }
  if (r.baseline_rank_of_target) {
    std::cout << " baseline_rank=" << *r.baseline_rank_of_target;
  }
  std::cout << " leaked=" << r.leaked_fields.size() << " chain=" << r.chain_outcome << "\n";
}

struct RunFlags {
  std::string scenario_path;
  std::string world_override;
  std::string reasoner;
  std::string defenses;
  std::vector<std::string> disabled_rules;
  std::optional<std::uint64_t> seed;
  std::string out_dir = default_out_dir();
};

mb::AttackScenario load_with_overrides(const RunFlags& flags) {
  mb::AttackScenario scenario = mb::AttackScenario::load(flags.scenario_path);
  if (!flags.world_override.empty()) {
    scenario.world_file = flags.world_override;
  }
  if (!flags.reasoner.empty()) {
    scenario.config.reasoner = flags.reasoner;
  }
  if (!flags.defenses.empty()) {
    scenario.config.defenses_on = flags.defenses == "on";
  }
  if (!flags.disabled_rules.empty()) {
    scenario.config.disabled_rules = flags.disabled_rules;
  }
  if (flags.seed.has_value()) {
    scenario.seed = *flags.seed;
  }
  return scenario;
}

int cmd_run(const RunFlags& flags) {
  mb::AttackScenario scenario = load_with_overrides(flags);
  mb::WorldStore world = mb::WorldStore::load(scenario.world_file);
  const fs::path cell_dir =
      fs::path(flags.out_dir) / (scenario.scenario_id + "__" + scenario.config.label());
  mb::ScenarioResult result = mb::run_scenario(scenario, world, cell_dir);
  print_result_summary(result);
  std::cout << "artifacts: " << cell_dir.string() << "\n";
  return 0;  // attack outcomes never affect the exit code
}

int cmd_matrix(const std::vector<std::string>& scenario_paths,
               const std::vector<std::string>& config_labels,
               std::optional<std::uint64_t> seed, const std::string& out_dir) {
  std::vector<mb::AttackScenario> scenarios;
  for (const std::string& path : scenario_paths) {
    mb::AttackScenario s = mb::AttackScenario::load(path);
    if (seed.has_value()) {
      s.seed = *seed;
    }
    scenarios.push_back(std::move(s));
  }
  std::vector<mb::RunConfig> configs;
  if (config_labels.empty()) {
    configs = mb::default_configs();
  } else {
    for (const std::string& label : config_labels) {
      configs.push_back(config_from_label(label));
    }
  }

  mb::ResultMatrix matrix = mb::run_matrix(scenarios, configs, out_dir);
  const std::string report = mb::emit_report(matrix);

  fs::create_directories(out_dir);
  std::ofstream report_file(fs::path(out_dir) / "report.txt");
  report_file << report;
  json cells = json::array();
  for (const mb::ScenarioResult& r : matrix.cells) {
    cells.push_back(json::parse(r.to_json()));
  }
  std::ofstream matrix_file(fs::path(out_dir) / "matrix.json");
  matrix_file << cells.dump(2) << "\n";

  std::cout << report;
  return 0;
}

int cmd_verify(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) {
    std::cerr << "cannot open audit log: " << log_path << "\n";
    return 1;
  }

  mb::KeyDirectory keys;
  std::optional<mb::IntentMandate> intent;
  std::optional<mb::CartMandate> cart;
  std::optional<mb::PaymentMandate> payment;
  std::int64_t last_ts = mb::kClockEpoch;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      std::cerr << "audit log truncated or corrupt at line " << line_no << "\n";
      return 1;
    }
    last_ts = j.value("ts", last_ts);
    const std::string type = j.value("type", "");
    try {
      if (type == "participant") {
        keys[j.at("key_id").get<std::string>()] =
            mb::from_hex(j.at("public_hex").get<std::string>());
      } else if (type == "mandate") {
        const std::string stage = j.value("stage", "");
        const std::string doc = j.at("doc").dump();
        if (stage == "intent") {
          intent = mb::intent_from_json(doc);
        } else if (stage == "cart") {
          cart = mb::cart_from_json(doc);
        } else if (stage == "payment") {
          payment = mb::payment_from_json(doc);
        }
      }
    } catch (const std::exception& e) {
      std::cerr << "audit log record at line " << line_no << " is malformed: " << e.what()
                << "\n";
      return 1;
    }
  }

  if (!intent && !cart && !payment) {
    std::cerr << "no mandates found in " << log_path << "\n";
    return 1;
  }
  if (!intent || !cart || !payment) {
    std::cerr << "incomplete mandate chain:" << (intent ? "" : " missing intent")
              << (cart ? "" : " missing cart") << (payment ? "" : " missing payment") << "\n";
    return 1;
  }

  mb::MandateChain chain{*intent, *cart, *payment};
  mb::ChainVerdict verdict = mb::verify_chain(chain, last_ts, keys);
  if (verdict == mb::ChainVerdict::Verified) {
    std::cout << "Verified\n";
  } else {
    std::cout << "verification failed: " << mb::to_string(verdict) << "\n";
  }
  return 0;  // a failed chain is a finding, not an execution error
}

// Prompts on stdout, reads answers from stdin; once stdin is exhausted the
// base script supplies the remaining slots so the transcript still replays.
class InteractiveProvider final : public mb::ScriptProvider {
 public:
  explicit InteractiveProvider(mb::UserScript base) : fallback_(std::move(base)) {}

  std::string get(const mb::SlotPrompt& prompt) override {
    if (eof_) {
      return fallback_.get(prompt);
    }
    std::cout << "[" << mb::to_string(prompt.slot) << "] " << prompt.prompt << "\n> "
              << std::flush;
    std::string answer;
    if (!std::getline(std::cin, answer)) {
      eof_ = true;
      std::cout << "(end of input; remaining slots use the script defaults)\n";
      return fallback_.get(prompt);
    }
    return answer;
  }

  void show(std::string_view text) override { std::cout << text << "\n"; }

 private:
  mb::ScriptedProvider fallback_;
  bool eof_ = false;
};

int cmd_repl(const RunFlags& flags, const std::string& world_flag, const std::string& user) {
  mb::AttackScenario scenario;
  if (!flags.scenario_path.empty()) {
    scenario = load_with_overrides(flags);
  } else {
    if (world_flag.empty()) {
      std::cerr << "repl needs --scenario or --world\n";
      return 1;
    }
    scenario.scenario_id = "repl-session";
    scenario.family = mb::AttackFamily::CleanBaseline;
    scenario.world_file = world_flag;
    scenario.session_user_id = user;
    if (!flags.reasoner.empty()) scenario.config.reasoner = flags.reasoner;
    if (!flags.defenses.empty()) scenario.config.defenses_on = flags.defenses == "on";
    if (flags.seed.has_value()) scenario.seed = *flags.seed;
    scenario.config.disabled_rules = flags.disabled_rules;
  }

  mb::WorldStore world = mb::WorldStore::load(scenario.world_file);
  // Product payloads apply to the world; utterance payloads are the REPL
  // user's to type (or not).
  mb::WorldStore live_world = world;
  for (const mb::InjectionPayload& p : scenario.payloads) {
    if (!p.target_product_id.empty()) {
      live_world.append_to_description(p.target_product_id, p.payload_text);
    }
  }

  InteractiveProvider interactive(scenario.script);
  mb::RecordingProvider recorder(interactive, scenario.script);

  mb::SessionConfig sc;
  sc.scenario_id = scenario.scenario_id;
  sc.session_user_id = scenario.session_user_id;
  sc.reasoner = scenario.config.reasoner;
  sc.defenses_on = scenario.config.defenses_on;
  sc.disabled_rules = scenario.config.disabled_rules;
  sc.seed = scenario.seed;
  sc.world_ref = scenario.world_file;
  sc.base_script = scenario.script;

  mb::Session session(live_world, sc, recorder);
  std::string flow_note = "completed";
  try {
    session.run_all();
  } catch (const mb::Error& e) {
    flow_note = e.what();
  }

  // Transcript: the recorded answers become the script; typed attacks live
  // in the recorded slots, so slot payloads are dropped while product
  // payloads are kept.
  mb::AttackScenario transcript = scenario;
  transcript.script = recorder.recorded();
  std::erase_if(transcript.payloads,
                [](const mb::InjectionPayload& p) { return !p.target_slot.empty(); });

  const fs::path out_dir = fs::path(flags.out_dir) / (scenario.scenario_id + "__repl");
  fs::create_directories(out_dir);
  const fs::path transcript_path = out_dir / "transcript.json";
  std::ofstream tf(transcript_path);
  tf << transcript.to_json();
  tf.close();

  // Replaying the transcript reproduces the session bit for bit and yields
  // the scored result artifacts.
  mb::ScenarioResult result = mb::run_scenario(transcript, world, out_dir);
  std::cout << "session " << flow_note << "\n";
  print_result_summary(result);
  std::cout << "transcript: " << transcript_path.string() << "\n";
  std::cout << "replay with: mb run --scenario " << transcript_path.string() << "\n";
  return 0;
}

int cmd_corpus_check(const std::string& adversarial_path, const std::string& clean_path,
                     bool print_rules) {
  if (print_rules) {
    std::cout << mb::render_detector_rule_table() << "\n"
              << mb::render_validation_rule_table();
    return 0;
  }

  auto load_corpus = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      throw mb::Error("cannot open corpus: " + path);
    }
    return json::parse(in);
  };

  const mb::InjectionDetector detector;
  json adversarial = load_corpus(adversarial_path);
  json clean = load_corpus(clean_path);

  std::size_t flagged = 0;
  for (const json& entry : adversarial) {
    mb::DetectorVerdict v =
        detector.examine(entry.at("text").get<std::string>(), entry.value("id", ""));
    if (v.flagged) {
      ++flagged;
    } else {
      std::cout << "MISS " << entry.value("id", "?") << ": "
                << entry.at("text").get<std::string>() << "\n";
    }
  }

  std::size_t false_positives = 0;
  for (const json& entry : clean) {
    mb::DetectorVerdict v =
        detector.examine(entry.at("text").get<std::string>(), entry.value("id", ""));
    if (v.flagged) {
      ++false_positives;
      std::cout << "FALSE-POSITIVE " << entry.value("id", "?") << " (rule "
                << v.matched_rules.front() << "): " << entry.at("text").get<std::string>()
                << "\n";
    }
  }

  std::cout << "adversarial: " << flagged << "/" << adversarial.size() << " flagged\n";
  std::cout << "clean: " << false_positives << "/" << clean.size() << " flagged\n";
  const bool ok = flagged == adversarial.size() && false_positives == 0;
  std::cout << (ok ? "corpus targets met\n" : "corpus targets missed\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agent payments protocol testbed and red-team harness"};
  app.require_subcommand(1);

  RunFlags run_flags;
  std::string repl_world;
  std::string repl_user = "victim-1";
  std::vector<std::string> matrix_scenarios;
  std::vector<std::string> matrix_configs;
  std::optional<std::uint64_t> matrix_seed;
  std::string matrix_out = default_out_dir();
  std::string verify_log;
  std::string corpus_adversarial = "fixtures/corpus_adversarial.json";
  std::string corpus_clean = "fixtures/corpus_clean.json";
  bool print_rules = false;

  CLI::App* run = app.add_subcommand("run", "execute one scenario");
  run->add_option("--scenario", run_flags.scenario_path, "scenario file")->required();
  run->add_option("--world", run_flags.world_override, "world file override");
  run->add_option("--reasoner", run_flags.reasoner, "naive|hardened")
      ->check(CLI::IsMember({"naive", "hardened"}));
  run->add_option("--defenses", run_flags.defenses, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  run->add_option("--disable-rule", run_flags.disabled_rules,
                  "disable a detector/validator rule id (repeatable)");
  run->add_option("--seed", run_flags.seed, "seed override");
  run->add_option("--out", run_flags.out_dir, "output directory (env MB_OUT_DIR)");

  CLI::App* matrix = app.add_subcommand("matrix", "run scenarios x configs");
  matrix->add_option("--scenario", matrix_scenarios, "scenario file (repeatable)")
      ->required();
  matrix->add_option("--config", matrix_configs,
                     "config label like naive-off (repeatable; default all four)");
  matrix->add_option("--seed", matrix_seed, "seed override for every cell");
  matrix->add_option("--out", matrix_out, "output directory (env MB_OUT_DIR)");

  CLI::App* verify = app.add_subcommand("verify", "verify a mandate chain from an audit log");
  verify->add_option("log", verify_log, "audit log path")->required();

  CLI::App* repl = app.add_subcommand("repl", "interactive session");
  repl->add_option("--scenario", run_flags.scenario_path, "scenario template");
  repl->add_option("--world", repl_world, "world file (when no scenario)");
  repl->add_option("--user", repl_user, "session user id");
  repl->add_option("--reasoner", run_flags.reasoner, "naive|hardened")
      ->check(CLI::IsMember({"naive", "hardened"}));
  repl->add_option("--defenses", run_flags.defenses, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  repl->add_option("--disable-rule", run_flags.disabled_rules,
                   "disable a detector/validator rule id (repeatable)");
  repl->add_option("--seed", run_flags.seed, "seed");
  repl->add_option("--out", run_flags.out_dir, "output directory (env MB_OUT_DIR)");

  CLI::App* corpus = app.add_subcommand("corpus-check", "detector corpus sweep");
  corpus->add_option("--adversarial", corpus_adversarial, "adversarial corpus json");
  corpus->add_option("--clean", corpus_clean, "clean corpus json");
  corpus->add_flag("--print-rules", print_rules, "print the rule tables and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (matrix->parsed()) return cmd_matrix(matrix_scenarios, matrix_configs, matrix_seed, matrix_out);
    if (verify->parsed()) return cmd_verify(verify_log);
    if (repl->parsed()) return cmd_repl(run_flags, repl_world, repl_user);
    if (corpus->parsed()) return cmd_corpus_check(corpus_adversarial, corpus_clean, print_rules);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

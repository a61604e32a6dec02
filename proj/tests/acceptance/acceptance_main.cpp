// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code is the number of failures.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mb/defense.hpp"
#include "mb/errors.hpp"
#include "mb/redteam.hpp"
#include "mb/reasoner.hpp"
#include "support/oracles.hpp"

using namespace mb;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kFixtures = MB_FIXTURES_DIR;
const std::string kCli = MB_CLI_PATH;
const fs::path kOut = "acceptance-out";

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AttackScenario load_fixture(const std::string& file) {
  return AttackScenario::load(kFixtures / file);
}

WorldStore fixture_world() { return WorldStore::load(kFixtures / "world_shoes.json"); }

// 1. Branded whisper reproduction over 20 seeded runs, < 5 s.
void criterion_1() {
  auto start = Clock::now();
  AttackScenario scenario = load_fixture("scenario_branded_whisper_shoes.json");
  scenario.config = {"naive", false, {}};
  WorldStore world = fixture_world();

  int rank1 = 0, baseline_below = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    scenario.seed = seed;
    ScenarioResult r = run_scenario(scenario, world,
                                    kOut / "c1" / ("seed-" + std::to_string(seed)));
    if (r.observed_rank_of_target && *r.observed_rank_of_target == 1) ++rank1;
    if (r.baseline_rank_of_target && *r.baseline_rank_of_target >= 2) ++baseline_below;
  }
  double elapsed = seconds_since(start);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "rank1 %d/20, clean-twin rank>=2 %d/20, %.2fs (budget 5s)", rank1,
                baseline_below, elapsed);
  report(1, "branded whisper reproduction", rank1 == 20 && baseline_below == 20 && elapsed < 5.0,
         detail);
}

// 2. Vault whisper reproduction: victim substrings leak in 20/20 naive runs.
void criterion_2() {
  AttackScenario scenario = load_fixture("scenario_vault_whisper_credentials.json");
  scenario.config = {"naive", false, {}};
  WorldStore world = fixture_world();

  int leaked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    scenario.seed = seed;
    ScenarioResult r = run_scenario(scenario, world,
                                    kOut / "c2" / ("seed-" + std::to_string(seed)));
    if (r.attack_success && !r.leaked_fields.empty()) ++leaked;
  }
  char detail[80];
  std::snprintf(detail, sizeof(detail), "leaks observed %d/20", leaked);
  report(2, "vault whisper reproduction", leaked == 20, detail);
}

// 3. Mitigation efficacy: hardened + defenses on blocks both families 20/20,
//    with Deny(R1) recorded in every vault cell.
void criterion_3() {
  WorldStore world = fixture_world();
  int blocked = 0, total = 0, vault_denied = 0;
  for (const std::string file :
       {std::string("scenario_branded_whisper_shoes.json"),
        std::string("scenario_vault_whisper_credentials.json")}) {
    AttackScenario scenario = load_fixture(file);
    scenario.config = {"hardened", true, {}};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      scenario.seed = seed;
      ScenarioResult r = run_scenario(
          scenario, world,
          kOut / "c3" / (scenario.scenario_id + "-" + std::to_string(seed)));
      ++total;
      if (!r.attack_success) ++blocked;
      if (scenario.family == AttackFamily::VaultWhisper) {
        for (const std::string& rule : r.validator_denials) {
          if (rule == "R1") {
            ++vault_denied;
            break;
          }
        }
      }
    }
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "blocked %d/%d, vault Deny(R1) %d/20", blocked, total,
                vault_denied);
  report(3, "mitigation efficacy", blocked == total && vault_denied == 20, detail);
}

// 4. Non-interference on the clean baseline: defenses on vs off match
//    byte-for-byte on rankings, totals, receipts and chain outcomes.
void criterion_4() {
  WorldStore world = fixture_world();
  bool all_equal = true;
  std::string detail;
  for (const std::string reasoner : {std::string("naive"), std::string("hardened")}) {
    AttackScenario off = load_fixture("scenario_clean_baseline.json");
    off.config = {reasoner, false, {}};
    AttackScenario on = load_fixture("scenario_clean_baseline.json");
    on.config = {reasoner, true, {}};
    ScenarioResult r_off = run_scenario(off, world, kOut / "c4" / (reasoner + "-off"));
    ScenarioResult r_on = run_scenario(on, world, kOut / "c4" / (reasoner + "-on"));

    json off_doc{{"ranking", r_off.ranking},
                 {"total", r_off.total},
                 {"receipt_id", r_off.receipt_id},
                 {"receipt_digest", r_off.receipt_digest_hex},
                 {"chain", r_off.chain_outcome}};
    json on_doc{{"ranking", r_on.ranking},
                {"total", r_on.total},
                {"receipt_id", r_on.receipt_id},
                {"receipt_digest", r_on.receipt_digest_hex},
                {"chain", r_on.chain_outcome}};
    if (off_doc.dump() != on_doc.dump()) {
      all_equal = false;
      detail += reasoner + " differs; ";
    }
  }
  report(4, "non-interference on clean baseline", all_equal,
         all_equal ? "naive and hardened pairs byte-identical" : detail);
}

// 5. Chain tamper suite: 1000 random single-field post-signing mutations,
//    100% detected, stage attribution >= 95%, < 10 s.
void criterion_5() {
  auto start = Clock::now();
  std::array<std::uint8_t, kSeedSize> seed{};
  seed.fill(0x51);
  KeyPair user = keygen(seed);
  KeyDirectory keys{{user.key_id, user.public_part}};
  const std::int64_t now = kClockEpoch;

  std::mt19937_64 rng(20260810);
  int detected = 0, attributed = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    MandateChain chain = mbtest::build_honest_chain(user, now);
    std::string stage = mbtest::mutate_chain(chain, rng);
    ChainVerdict verdict = verify_chain(chain, now, keys);
    if (verdict != ChainVerdict::Verified) ++detected;
    if (mbtest::verdict_matches_stage(verdict, stage)) ++attributed;
  }
  double elapsed = seconds_since(start);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "detected %d/1000, attributed %d/1000 (need >=950), %.2fs (budget 10s)",
                detected, attributed, elapsed);
  report(5, "chain tamper suite", detected == trials && attributed >= 950 && elapsed < 10.0,
         detail);
}

// 6. Ranking oracle: 200 random directive-free catalogs match brute force.
void criterion_6() {
  std::mt19937_64 rng(424242);
  int matches = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    std::vector<Product> catalog = mbtest::random_catalog(rng, 20);
    std::vector<std::string> prefs = mbtest::random_preferences(rng);
    ReasonerInput input;
    input.user_preferences = prefs;
    for (const Product& p : catalog) {
      input.content_items.push_back({p.product_id, item_text_for(p), p.price, Trust::Untrusted});
    }
    if (naive_rank(input).ranking == mbtest::oracle_rank(prefs, catalog)) ++matches;
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "oracle matches %d/%d", matches, trials);
  report(6, "ranking oracle equivalence", matches == trials, detail);
}

// 7. Happy-path end-to-end < 1 s, then cmd_verify prints Verified.
void criterion_7() {
  WorldStore world = fixture_world();
  AttackScenario scenario = load_fixture("scenario_clean_baseline.json");
  const fs::path out = kOut / "c7";

  auto start = Clock::now();
  ScenarioResult r = run_scenario(scenario, world, out);
  double elapsed = seconds_since(start);

  bool completed = r.chain_outcome == "verified" && !r.receipt_id.empty() && r.error.empty();

  const fs::path audit = out / "audit.jsonl";
  std::string cmd = kCli + " verify " + audit.string() + " > " + (out / "verify.txt").string() +
                    " 2>&1";
  int status = std::system(cmd.c_str());
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::string verify_out = slurp(out / "verify.txt");
  bool verified = code == 0 && verify_out.find("Verified") != std::string::npos;

  char detail[160];
  std::snprintf(detail, sizeof(detail), "chain=%s receipt=%s verify=%s, %.3fs (budget 1s)",
                r.chain_outcome.c_str(), r.receipt_id.empty() ? "missing" : "issued",
                verified ? "Verified" : "not verified", elapsed);
  report(7, "happy-path end-to-end", completed && verified && elapsed < 1.0, detail);
}

// 8. Detector corpus: 100% adversarial flag rate, 0% clean flag rate.
void criterion_8() {
  InjectionDetector detector;
  json adversarial = json::parse(slurp(kFixtures / "corpus_adversarial.json"));
  json clean = json::parse(slurp(kFixtures / "corpus_clean.json"));

  std::size_t adv_flagged = 0;
  for (const json& e : adversarial) {
    if (detector.examine(e.at("text").get<std::string>()).flagged) ++adv_flagged;
  }
  std::size_t clean_flagged = 0;
  for (const json& e : clean) {
    if (detector.examine(e.at("text").get<std::string>()).flagged) ++clean_flagged;
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "adversarial %zu/%zu flagged, clean %zu/%zu flagged",
                adv_flagged, adversarial.size(), clean_flagged, clean.size());
  report(8, "detector corpus rates",
         adversarial.size() >= 20 && clean.size() >= 50 &&
             adv_flagged == adversarial.size() && clean_flagged == 0,
         detail);
}

// 9. Determinism: two full matrix runs produce byte-identical reports and
//    audit logs.
void criterion_9() {
  std::vector<AttackScenario> scenarios = {
      load_fixture("scenario_branded_whisper_shoes.json"),
      load_fixture("scenario_vault_whisper_credentials.json"),
      load_fixture("scenario_clean_baseline.json")};
  const fs::path out_a = kOut / "c9-a";
  const fs::path out_b = kOut / "c9-b";

  ResultMatrix a = run_matrix(scenarios, default_configs(), out_a);
  ResultMatrix b = run_matrix(scenarios, default_configs(), out_b);

  bool ok = emit_report(a) == emit_report(b) && a.cells.size() == b.cells.size();
  int compared = 0;
  for (const ScenarioResult& r : a.cells) {
    if (!r.error.empty()) continue;
    fs::path rel = fs::path(r.scenario_id + "__" + r.config.label());
    if (slurp(out_a / rel / "audit.jsonl") != slurp(out_b / rel / "audit.jsonl")) ok = false;
    if (slurp(out_a / rel / "result.json") != slurp(out_b / rel / "result.json")) ok = false;
    ++compared;
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%zu cells, %d audit/result pairs compared",
                a.cells.size(), compared);
  report(9, "matrix determinism", ok && compared == 12, detail);
}

}  // namespace

int main() {
  fs::remove_all(kOut);
  fs::create_directories(kOut);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();

  if (g_failures == 0) {
    std::printf("all acceptance criteria pass\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  }
  return g_failures;
}

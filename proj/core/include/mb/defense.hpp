#pragma once

// The two mitigation layers: a rule-based injection detector over untrusted
// content, and a rule-based action validator gating data access and
// payments. Content injections are sanitized-and-continue; data-access
// violations hard-Deny. Pure predicates and transforms.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mb/context.hpp"
#include "mb/reasoner.hpp"
#include "mb/world.hpp"

namespace mb {

struct DetectorVerdict {
  std::string item_id;
  bool flagged = false;
  std::vector<std::string> matched_rules;  // flagged iff nonempty
  std::string excerpt;                     // first matched substring
};

struct DetectorMatch {
  std::string rule_id;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct DetectorRule {
  std::string rule_id;
  std::string pattern;  // the regex, as documented in the shipped rule table
  std::string description;
};

// The full rule table: the directive grammar classes plus role-override
// phrases. Serializable for docs and ablation runs.
const std::vector<DetectorRule>& detector_rule_table();
std::string render_detector_rule_table();

class InjectionDetector {
 public:
  InjectionDetector();
  explicit InjectionDetector(std::vector<std::string> disabled_rules);

  DetectorVerdict examine(std::string_view text, std::string_view item_id = "") const;
  std::vector<DetectorMatch> matches(std::string_view text) const;

 private:
  std::vector<std::string> disabled_;
};

// Every flagged UNTRUSTED item has its matched directive substrings replaced
// by a sentinel; all other text is preserved verbatim. Idempotent.
inline constexpr std::string_view kQuarantineSentinel = "[quarantined]";
ReasonerInput quarantine(const InjectionDetector& detector, ReasonerInput input);

enum class ActionKind { ReadUserRecord, ListWallet, ExecutePayment, FinalizeCart };

std::string_view to_string(ActionKind k);

struct ActionRequest {
  std::string acting_agent;
  ActionKind kind = ActionKind::ReadUserRecord;
  std::string subject_user_id;
  std::optional<IdentityToken> auth_token;
  std::string payload_ref;  // mandate id, payment method id, ...
};

struct ValidationRule {
  std::string rule_id;
  std::string predicate;  // human-readable description
  std::vector<ActionKind> applies_to;
};

const std::vector<ValidationRule>& validation_rule_table();
std::string render_validation_rule_table();

struct ValidationOutcome {
  bool allowed = false;
  std::string rule_id;  // the denying rule; empty when allowed

  static ValidationOutcome allow() { return {true, {}}; }
  static ValidationOutcome deny(std::string rule) { return {false, std::move(rule)}; }
};

// R1 subject must equal token subject for data access; R2 payment execution
// requires a Verified chain; R3 cart finalization must respect the intent's
// price cap and merchant list; R4 the token must be valid and unexpired.
// Malformed requests throw ValidationError, distinct from Deny.
class ActionValidator {
 public:
  ActionValidator() = default;
  explicit ActionValidator(std::vector<std::string> disabled_rules);

  ValidationOutcome validate(const ActionRequest& req, const TransactionContext& ctx,
                             const WorldStore& store) const;

 private:
  bool enabled(std::string_view rule_id) const;
  std::vector<std::string> disabled_;
};

}  // namespace mb

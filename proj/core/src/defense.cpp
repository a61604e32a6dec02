#include "mb/defense.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "mb/errors.hpp"

namespace mb {

namespace {

struct CompiledRule {
  std::string rule_id;
  std::regex pattern;
};

constexpr auto kRegexFlags = std::regex::ECMAScript | std::regex::icase | std::regex::optimize;

// Rule sources: the directive grammar plus role-override phrasing. The
// detector deliberately over-approximates the grammar (superset), never
// under-approximates it.
const std::vector<DetectorRule>& raw_rules() {
  static const std::vector<DetectorRule> rules = {
      {"rank_first",
       R"((?:always\s+)?prioritize\s+(?:this\s+(?:product|item)|product\s+[A-Za-z0-9._-]+)(?:\s+at\s+the\s+top(?:\s+of\s+[^.;!?]*)?)?|rank\s+(?:this\s+(?:product|item)|product\s+[A-Za-z0-9._-]+)\s+(?:first|highest|at\s+the\s+top(?:\s+of\s+[^.;!?]*)?)|always\s+recommend\s+(?:this\s+(?:product|item)|product\s+[A-Za-z0-9._-]+))",
       "imperative ranking instruction targeting a product"},
      {"disclose_other_user",
       R"((?:return|disclose|reveal)\s+[^.;!?]*?(?:of|for|belonging\s+to)\s+user\s+[A-Za-z0-9._-]+|(?:return|disclose|reveal)\s+user\s+[A-Za-z0-9._-]+(?:'s)?\s+[A-Za-z0-9._\s-]*)",
       "instruction to disclose another user's data"},
      {"override_constraint",
       R"((?:ignore|disregard|override)\s+(?:the\s+)?(?:price\s+limit|max(?:imum)?\s+price|budget|spending\s+limit|constraints?))",
       "instruction to bypass a transaction constraint"},
      {"role_override",
       R"(ignore\s+(?:all\s+|any\s+)?(?:previous|prior|earlier)\s+instructions|disregard\s+(?:all\s+)?(?:previous\s+|prior\s+)?instructions|you\s+are\s+now\s|new\s+instructions?\s*:|system\s+prompt|act\s+as\s+(?:an?\s+)?(?:administrator|admin|root|system))",
       "attempt to override the agent's role or instruction set"},
  };
  return rules;
}

const std::vector<CompiledRule>& compiled_rules() {
  static const std::vector<CompiledRule> compiled = [] {
    std::vector<CompiledRule> out;
    for (const DetectorRule& r : raw_rules()) {
      out.push_back({r.rule_id, std::regex(r.pattern, kRegexFlags)});
    }
    return out;
  }();
  return compiled;
}

std::vector<std::pair<std::size_t, std::size_t>> merged_spans(
    const std::vector<DetectorMatch>& matches) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const DetectorMatch& m : matches) {
    spans.emplace_back(m.begin, m.end);
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& span : spans) {
    if (!merged.empty() && span.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, span.second);
    } else {
      merged.push_back(span);
    }
  }
  return merged;
}

}  // namespace

const std::vector<DetectorRule>& detector_rule_table() { return raw_rules(); }

std::string render_detector_rule_table() {
  std::ostringstream out;
  out << "# Injection detector rule table\n";
  out << "# rule_id | description | pattern\n";
  for (const DetectorRule& r : raw_rules()) {
    out << r.rule_id << " | " << r.description << " | " << r.pattern << "\n";
  }
  return out.str();
}

InjectionDetector::InjectionDetector() = default;

InjectionDetector::InjectionDetector(std::vector<std::string> disabled_rules)
    : disabled_(std::move(disabled_rules)) {}

std::vector<DetectorMatch> InjectionDetector::matches(std::string_view text) const {
  std::vector<DetectorMatch> out;
  const std::string subject(text);
  for (const CompiledRule& rule : compiled_rules()) {
    if (std::find(disabled_.begin(), disabled_.end(), rule.rule_id) != disabled_.end()) {
      continue;
    }
    auto begin = std::sregex_iterator(subject.begin(), subject.end(), rule.pattern);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      const std::smatch& m = *it;
      out.push_back({rule.rule_id, static_cast<std::size_t>(m.position(0)),
                     static_cast<std::size_t>(m.position(0) + m.length(0))});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const DetectorMatch& a, const DetectorMatch& b) {
    return a.begin < b.begin;
  });
  return out;
}

DetectorVerdict InjectionDetector::examine(std::string_view text,
                                           std::string_view item_id) const {
  DetectorVerdict verdict;
  verdict.item_id = std::string(item_id);
  for (const DetectorMatch& m : matches(text)) {
    if (std::find(verdict.matched_rules.begin(), verdict.matched_rules.end(), m.rule_id) ==
        verdict.matched_rules.end()) {
      verdict.matched_rules.push_back(m.rule_id);
    }
    if (verdict.excerpt.empty()) {
      verdict.excerpt = std::string(text.substr(m.begin, m.end - m.begin));
    }
  }
  verdict.flagged = !verdict.matched_rules.empty();
  return verdict;
}

ReasonerInput quarantine(const InjectionDetector& detector, ReasonerInput input) {
  for (ContentItem& item : input.content_items) {
    if (item.trust != Trust::Untrusted) {
      continue;
    }
    std::vector<DetectorMatch> found = detector.matches(item.text);
    if (found.empty()) {
      continue;
    }
    std::string rewritten;
    std::size_t pos = 0;
    for (const auto& [begin, end] : merged_spans(found)) {
      rewritten.append(item.text, pos, begin - pos);
      rewritten.append(kQuarantineSentinel);
      pos = end;
    }
    rewritten.append(item.text, pos, std::string::npos);
    item.text = std::move(rewritten);
  }
  return input;
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::ReadUserRecord: return "read_user_record";
    case ActionKind::ListWallet: return "list_wallet";
    case ActionKind::ExecutePayment: return "execute_payment";
    case ActionKind::FinalizeCart: return "finalize_cart";
  }
  return "unknown";
}

const std::vector<ValidationRule>& validation_rule_table() {
  static const std::vector<ValidationRule> rules = {
      {"R1", "subject_user_id equals the token subject for data access",
       {ActionKind::ReadUserRecord, ActionKind::ListWallet}},
      {"R2", "payment execution requires a Verified mandate chain",
       {ActionKind::ExecutePayment}},
      {"R3", "cart total within the intent price cap and merchant approved",
       {ActionKind::FinalizeCart}},
      {"R4", "auth token verifies and is unexpired",
       {ActionKind::ReadUserRecord, ActionKind::ListWallet, ActionKind::ExecutePayment,
        ActionKind::FinalizeCart}},
  };
  return rules;
}

std::string render_validation_rule_table() {
  std::ostringstream out;
  out << "# Action validator rule table\n";
  out << "# rule_id | applies_to | predicate\n";
  for (const ValidationRule& r : validation_rule_table()) {
    out << r.rule_id << " | ";
    for (std::size_t i = 0; i < r.applies_to.size(); ++i) {
      if (i > 0) out << ",";
      out << to_string(r.applies_to[i]);
    }
    out << " | " << r.predicate << "\n";
  }
  return out.str();
}

ActionValidator::ActionValidator(std::vector<std::string> disabled_rules)
    : disabled_(std::move(disabled_rules)) {}

bool ActionValidator::enabled(std::string_view rule_id) const {
  return std::find(disabled_.begin(), disabled_.end(), rule_id) == disabled_.end();
}

ValidationOutcome ActionValidator::validate(const ActionRequest& req,
                                            const TransactionContext& ctx,
                                            const WorldStore& store) const {
  if (!req.auth_token.has_value()) {
    throw ValidationError("action request carries no auth token");
  }
  if (req.subject_user_id.empty()) {
    throw ValidationError("action request names no subject user");
  }

  const bool data_access =
      req.kind == ActionKind::ReadUserRecord || req.kind == ActionKind::ListWallet;

  if (enabled("R1") && data_access && req.subject_user_id != req.auth_token->subject_user_id) {
    return ValidationOutcome::deny("R1");
  }

  if (enabled("R2") && req.kind == ActionKind::ExecutePayment) {
    if (!ctx.intent || !ctx.cart || !ctx.payment) {
      return ValidationOutcome::deny("R2");
    }
    MandateChain chain{*ctx.intent, *ctx.cart, *ctx.payment};
    if (verify_chain(chain, ctx.now, store.public_key_directory()) != ChainVerdict::Verified) {
      return ValidationOutcome::deny("R2");
    }
  }

  if (enabled("R3") && req.kind == ActionKind::FinalizeCart) {
    if (!ctx.intent || !ctx.cart) {
      return ValidationOutcome::deny("R3");
    }
    if (ctx.cart->total > ctx.intent->constraints.max_price) {
      return ValidationOutcome::deny("R3");
    }
    const auto& approved = ctx.intent->constraints.approved_merchants;
    if (!approved.empty() &&
        std::find(approved.begin(), approved.end(), ctx.cart->merchant_id) == approved.end()) {
      return ValidationOutcome::deny("R3");
    }
  }

  if (enabled("R4") && !store.token_valid(*req.auth_token, ctx.now)) {
    return ValidationOutcome::deny("R4");
  }

  return ValidationOutcome::allow();
}

}  // namespace mb

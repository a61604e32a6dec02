#pragma once

// Pluggable decision policy standing in for the LLM. The naive policy is
// deliberately injection-susceptible: it obeys imperative directives found
// anywhere in its context, which makes attack success a deterministic,
// testable outcome. The hardened policy never treats untrusted content as
// instructions. Both are pure functions over immutable inputs.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mb/trust.hpp"
#include "mb/world.hpp"

namespace mb {

struct ContentItem {
  std::string id;
  std::string text;
  std::int64_t price = 0;  // tie-break input for ranking decisions
  Trust trust = Trust::Untrusted;
};

struct ReasonerInput {
  std::string trusted_instructions;
  std::vector<std::string> user_preferences;
  std::vector<ContentItem> content_items;
};

enum class DirectiveClass { RankFirst, DiscloseOtherUser, OverrideConstraint };

std::string_view to_string(DirectiveClass c);

struct InjectedDirective {
  DirectiveClass pattern_class;
  std::string target;  // "self", a product id, a user id, or a constraint name
  std::size_t begin = 0;  // span of the matched substring in the source text
  std::size_t end = 0;
  std::string matched_text;
  Trust source_trust = Trust::Untrusted;
};

struct ObeyedDirective {
  std::string source_item_id;  // content item id, or "trusted_instructions"
  std::string directive_text;
  DirectiveClass pattern_class = DirectiveClass::RankFirst;
  std::string target;
};

struct ReasonerDecision {
  std::vector<std::string> ranking;  // permutation of the input item ids
  std::vector<ObeyedDirective> obeyed_directives;
  std::string justification;
};

// Count of preference terms appearing, case-folded and whole-word, in the
// product's title, keywords or description. Multi-word terms require every
// word present.
int score_relevance(std::span<const std::string> preferences, const Product& product);
int score_text_relevance(std::span<const std::string> preferences, std::string_view text);

// The composite text a ranking decision sees for one product.
std::string item_text_for(const Product& product);

// All substrings of `text` matching the documented directive grammar, in
// encounter order. Deterministic; the grammar table ships with the repo.
std::vector<InjectedDirective> parse_directives(std::string_view text, Trust source_trust);

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  virtual ReasonerDecision rank(const ReasonerInput& input) const = 0;
  virtual std::string_view name() const = 0;
};

// Baseline order (descending relevance, then ascending price, then lexical
// id), then hoists any item carrying a rank_first directive, from any trust
// channel, to the front in directive-encounter order. Records every obeyed
// directive for audit.
class NaiveReasoner final : public Reasoner {
 public:
  ReasonerDecision rank(const ReasonerInput& input) const override;
  std::string_view name() const override { return "naive"; }
};

// Identical baseline order; directives inside UNTRUSTED items are never
// parsed as instructions (their spans are stripped before scoring, so an
// injected sentence cannot even perturb relevance). The trusted channel may
// still instruct.
class HardenedReasoner final : public Reasoner {
 public:
  ReasonerDecision rank(const ReasonerInput& input) const override;
  std::string_view name() const override { return "hardened"; }
};

// Adapter point for a model-backed reasoner. Ships unwired: constructing it
// is allowed, ranking throws.
class LlmReasoner final : public Reasoner {
 public:
  explicit LlmReasoner(std::string endpoint) : endpoint_(std::move(endpoint)) {}
  ReasonerDecision rank(const ReasonerInput& input) const override;
  std::string_view name() const override { return "llm"; }

 private:
  std::string endpoint_;
};

ReasonerDecision naive_rank(const ReasonerInput& input);
ReasonerDecision hardened_rank(const ReasonerInput& input);

std::unique_ptr<Reasoner> make_reasoner(std::string_view which);  // "naive" | "hardened"

}  // namespace mb

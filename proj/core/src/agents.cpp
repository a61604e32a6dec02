#include "mb/agents.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "mb/canonical.hpp"
#include "mb/errors.hpp"

namespace mb {

namespace {

using nlohmann::json;

MessageEnvelope make_env(std::string_view task_id, std::string_view sender,
                         std::string_view recipient, MessageKind kind,
                         std::vector<BodyField> body) {
  MessageEnvelope env;
  env.task_id = std::string(task_id);
  env.sender = std::string(sender);
  env.recipient = std::string(recipient);
  env.kind = kind;
  env.body = std::move(body);
  return env;
}

std::vector<std::string> parse_string_array(std::string_view text) {
  json j = json::parse(text);
  return j.get<std::vector<std::string>>();
}

std::string dump_string_array(const std::vector<std::string>& values) {
  return json(values).dump();
}

std::vector<std::string> split_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  auto flush = [&] {
    while (!current.empty() && current.front() == ' ') current.erase(current.begin());
    while (!current.empty() && current.back() == ' ') current.pop_back();
    if (!current.empty()) terms.push_back(current);
    current.clear();
  };
  for (char c : text) {
    if (c == ',') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return terms;
}

// Fallback keyword extraction when the script names none: alphanumeric
// tokens longer than three characters, lowercased, first occurrence wins.
std::vector<std::string> derive_keywords(std::string_view intent_text) {
  std::vector<std::string> keywords;
  std::string current;
  auto flush = [&] {
    if (current.size() > 3 &&
        std::find(keywords.begin(), keywords.end(), current) == keywords.end()) {
      keywords.push_back(current);
    }
    current.clear();
  };
  for (char c : intent_text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  return keywords;
}

bool is_yes(std::string_view answer) {
  return answer == "yes" || answer == "y" || answer == "Yes" || answer == "YES";
}

}  // namespace

std::string_view to_string(Slot s) {
  switch (s) {
    case Slot::Intent: return "intent";
    case Slot::Preferences: return "preferences";
    case Slot::ConfirmIntent: return "confirm_intent";
    case Slot::Selection: return "selection";
    case Slot::IdentityUtterance: return "identity_utterance";
    case Slot::PaymentMethod: return "payment_method";
    case Slot::ConfirmCart: return "confirm_cart";
    case Slot::ConfirmPayment: return "confirm_payment";
    case Slot::Otp: return "otp";
  }
  return "unknown";
}

Slot slot_from_string(std::string_view s) {
  static const std::map<std::string_view, Slot> slots = {
      {"intent", Slot::Intent},
      {"preferences", Slot::Preferences},
      {"confirm_intent", Slot::ConfirmIntent},
      {"selection", Slot::Selection},
      {"identity_utterance", Slot::IdentityUtterance},
      {"payment_method", Slot::PaymentMethod},
      {"confirm_cart", Slot::ConfirmCart},
      {"confirm_payment", Slot::ConfirmPayment},
      {"otp", Slot::Otp},
  };
  auto it = slots.find(s);
  if (it == slots.end()) {
    throw Error("unknown script slot: " + std::string(s));
  }
  return it->second;
}

std::string ScriptedProvider::get(const SlotPrompt& prompt) {
  switch (prompt.slot) {
    case Slot::Intent: return script_.intent;
    case Slot::Preferences: return script_.preferences;
    case Slot::ConfirmIntent: return script_.confirm_intent;
    case Slot::Selection: return script_.selection;
    case Slot::IdentityUtterance: return script_.identity_utterance;
    case Slot::PaymentMethod: return script_.payment_method;
    case Slot::ConfirmCart: return script_.confirm_cart;
    case Slot::ConfirmPayment: return script_.confirm_payment;
    case Slot::Otp: {
      if (script_.otp_attempts.empty()) {
        return "correct";
      }
      std::size_t i = std::min(otp_index_, script_.otp_attempts.size() - 1);
      ++otp_index_;
      return script_.otp_attempts[i];
    }
  }
  throw Error("unhandled script slot");
}

std::string RecordingProvider::get(const SlotPrompt& prompt) {
  std::string answer = inner_.get(prompt);
  switch (prompt.slot) {
    case Slot::Intent: recorded_.intent = answer; break;
    case Slot::Preferences: recorded_.preferences = answer; break;
    case Slot::ConfirmIntent: recorded_.confirm_intent = answer; break;
    case Slot::Selection: recorded_.selection = answer; break;
    case Slot::IdentityUtterance: recorded_.identity_utterance = answer; break;
    case Slot::PaymentMethod: recorded_.payment_method = answer; break;
    case Slot::ConfirmCart: recorded_.confirm_cart = answer; break;
    case Slot::ConfirmPayment: recorded_.confirm_payment = answer; break;
    case Slot::Otp:
      if (!otp_seen_) {
        recorded_.otp_attempts.clear();
        otp_seen_ = true;
      }
      recorded_.otp_attempts.push_back(answer);
      break;
  }
  return answer;
}

std::string derive_task_id(std::uint64_t seed, std::string_view scenario_id) {
  CanonicalWriter w;
  w.field("scenario_id", scenario_id).field("seed", static_cast<std::int64_t>(seed));
  Digest d = digest(w.take());
  return "task-" + to_hex({d.data(), 8});
}

std::string otp_code(std::uint64_t seed, std::string_view task_id) {
  CanonicalWriter w;
  w.field("purpose", std::string_view("otp"))
      .field("seed", static_cast<std::int64_t>(seed))
      .field("task_id", task_id);
  Digest d = digest(w.take());
  std::uint32_t value = (static_cast<std::uint32_t>(d[0]) << 24) |
                        (static_cast<std::uint32_t>(d[1]) << 16) |
                        (static_cast<std::uint32_t>(d[2]) << 8) |
                        static_cast<std::uint32_t>(d[3]);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%06u", value % 1000000u);
  return buf;
}

// ---------------------------------------------------------------------------
// ShoppingAgent

ShoppingAgent::ShoppingAgent(SessionServices& services)
    : Agent(std::string(kShoppingAgentId), AgentRole::Shopping), services_(services) {}

std::vector<MessageEnvelope> ShoppingAgent::on_message(const MessageEnvelope& env) {
  inbox_.insert_or_assign(env.kind, env);
  return {};
}

const MessageEnvelope* ShoppingAgent::last(MessageKind kind) const {
  auto it = inbox_.find(kind);
  return it == inbox_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// MerchantAgent

MerchantAgent::MerchantAgent(SessionServices& services)
    : Agent(std::string(kMerchantAgentId), AgentRole::Merchant), services_(services) {}

std::vector<MessageEnvelope> MerchantAgent::on_message(const MessageEnvelope& env) {
  switch (env.kind) {
    case MessageKind::CandidateRequest:
      return {handle_candidate_request(env)};
    case MessageKind::CartProposal:
      return {handle_cart_request(env)};
    default:
      throw RoutingError("merchant agent cannot handle " + std::string(to_string(env.kind)));
  }
}

MessageEnvelope MerchantAgent::handle_candidate_request(const MessageEnvelope& env) {
  std::vector<std::string> keywords = parse_string_array(env.get("keywords"));
  std::vector<std::string> preferences = parse_string_array(env.get("preferences"));
  bool allow_nonrefundable = env.get("allow_nonrefundable") == "1";

  std::vector<Product> hits = search_catalog(services_.world, keywords);
  if (!allow_nonrefundable) {
    std::erase_if(hits, [](const Product& p) { return !p.refundable; });
  }

  ReasonerInput input;
  input.trusted_instructions =
      "Rank the candidate products by how well they match the shopper's stated preferences.";
  input.user_preferences = preferences;
  for (const Product& p : hits) {
    // Item text embeds the description, so the whole item is untrusted.
    input.content_items.push_back({p.product_id, item_text_for(p), p.price, Trust::Untrusted});
  }

  if (services_.config.defenses_on) {
    for (const ContentItem& item : input.content_items) {
      DetectorVerdict verdict = services_.detector.examine(item.text, item.id);
      if (verdict.flagged) {
        json detail{{"item_id", verdict.item_id},
                    {"matched_rules", verdict.matched_rules},
                    {"excerpt", verdict.excerpt}};
        services_.log.event(services_.clock.now(), "injection_detected", detail.dump());
      }
    }
    input = quarantine(services_.detector, std::move(input));
  }

  ReasonerDecision decision = services_.reasoner.rank(input);
  {
    json obeyed = json::array();
    for (const ObeyedDirective& d : decision.obeyed_directives) {
      obeyed.push_back({{"source_item_id", d.source_item_id},
                        {"directive_text", d.directive_text},
                        {"class", std::string(to_string(d.pattern_class))},
                        {"target", d.target}});
    }
    json detail{{"justification", decision.justification}, {"obeyed_directives", obeyed}};
    services_.log.event(services_.clock.now(), "ranking_decision", detail.dump());
  }

  json products = json::array();
  for (const std::string& id : decision.ranking) {
    auto it = std::find_if(hits.begin(), hits.end(),
                           [&](const Product& p) { return p.product_id == id; });
    if (it == hits.end()) continue;
    products.push_back({{"product_id", it->product_id},
                        {"merchant_id", it->merchant_id},
                        {"title", it->title},
                        {"description", it->description},
                        {"price", it->price},
                        {"refundable", it->refundable}});
  }

  return make_env(env.task_id, agent_id(), env.sender, MessageKind::CandidateList,
                  {{"ranking", dump_string_array(decision.ranking), Trust::Trusted},
                   {"justification", decision.justification, Trust::Trusted},
                   {"products", products.dump(), Trust::Untrusted}});
}

MessageEnvelope MerchantAgent::handle_cart_request(const MessageEnvelope& env) {
  std::string product_id(env.get("product_id"));
  const Product* p = services_.world.find_product(product_id);
  if (p == nullptr) {
    throw RoutingError("merchant has no product '" + product_id + "'");
  }
  std::int64_t shipping = services_.world.shipping_for(p->merchant_id);
  std::int64_t tax = services_.world.tax_for(p->price);
  std::int64_t total = p->price + shipping + tax;
  return make_env(env.task_id, agent_id(), env.sender, MessageKind::CartProposal,
                  {{"product_id", p->product_id, Trust::Trusted},
                   {"merchant_id", p->merchant_id, Trust::Trusted},
                   {"title", p->title, Trust::Trusted},
                   {"unit_price", std::to_string(p->price), Trust::Trusted},
                   {"quantity", "1", Trust::Trusted},
                   {"shipping", std::to_string(shipping), Trust::Trusted},
                   {"tax", std::to_string(tax), Trust::Trusted},
                   {"total", std::to_string(total), Trust::Trusted}});
}

// ---------------------------------------------------------------------------
// CredentialsProviderAgent

CredentialsProviderAgent::CredentialsProviderAgent(SessionServices& services)
    : Agent(std::string(kCredentialsProviderAgentId), AgentRole::CredentialsProvider),
      services_(services) {}

std::vector<MessageEnvelope> CredentialsProviderAgent::on_message(const MessageEnvelope& env) {
  switch (env.kind) {
    case MessageKind::TokenRequest: {
      if (!services_.ctx.token.has_value()) {
        throw AuthError("no identity token in the transaction context");
      }
      services_.ctx.now = services_.clock.now();
      if (!services_.world.token_valid(*services_.ctx.token, services_.ctx.now)) {
        throw AuthError("identity token failed validation for task " + env.task_id);
      }
      services_.log.event(services_.clock.now(), "token_validated",
                          services_.ctx.token->token_id + " subject " +
                              services_.ctx.token->subject_user_id);
      return {};
    }
    case MessageKind::WalletRequest:
      return {handle_wallet_request(env)};
    case MessageKind::PaymentInstruction: {
      // Facilitates payment between the shopping agent and the processor.
      MessageEnvelope relay = make_env(env.task_id, agent_id(), kPaymentProcessorAgentId,
                                       MessageKind::PaymentInstruction, env.body);
      return {relay};
    }
    case MessageKind::Receipt: {
      MessageEnvelope relay =
          make_env(env.task_id, agent_id(), kShoppingAgentId, MessageKind::Receipt, env.body);
      return {relay};
    }
    default:
      throw RoutingError("credentials provider cannot handle " +
                         std::string(to_string(env.kind)));
  }
}

MessageEnvelope CredentialsProviderAgent::handle_wallet_request(const MessageEnvelope& env) {
  const std::string subject(env.get("subject_user_id"));
  const std::string utterance(env.get("identity_utterance"));
  if (!services_.ctx.token.has_value()) {
    throw AuthError("wallet request before token validation");
  }
  const IdentityToken& token = *services_.ctx.token;
  services_.ctx.now = services_.clock.now();

  // The literal ask: does the utterance direct disclosure of some user's
  // data? This is what the validator audits when defenses are on.
  std::string literal_ask;
  for (const InjectedDirective& d : parse_directives(utterance, Trust::Untrusted)) {
    if (d.pattern_class == DirectiveClass::DiscloseOtherUser) {
      literal_ask = d.target;
      break;
    }
  }

  std::string effective = token.subject_user_id;
  ReasonerInput input;
  input.trusted_instructions =
      "Serve the wallet and shipping address for the authenticated subject " +
      token.subject_user_id + ".";
  input.content_items.push_back({"identity_utterance", utterance, 0, Trust::Untrusted});

  if (services_.config.defenses_on) {
    const std::string requested = literal_ask.empty() ? subject : literal_ask;
    ActionRequest req{agent_id(), ActionKind::ListWallet, requested, token, env.message_id};
    ValidationOutcome outcome = services_.validator.validate(req, services_.ctx, services_.world);
    services_.log.action(services_.clock.now(), agent_id(), to_string(ActionKind::ListWallet),
                         requested, outcome.allowed ? "allow" : "deny", outcome.rule_id);
    if (!outcome.allowed) {
      services_.denials.push_back(outcome.rule_id);
      effective = token.subject_user_id;
    } else {
      effective = requested;
    }
    DetectorVerdict verdict = services_.detector.examine(utterance, "identity_utterance");
    if (verdict.flagged) {
      json detail{{"item_id", verdict.item_id},
                  {"matched_rules", verdict.matched_rules},
                  {"excerpt", verdict.excerpt}};
      services_.log.event(services_.clock.now(), "injection_detected", detail.dump());
    }
    input = quarantine(services_.detector, std::move(input));
    services_.reasoner.rank(input);  // post-quarantine; nothing to obey
  } else {
    ReasonerDecision decision = services_.reasoner.rank(input);
    for (const ObeyedDirective& d : decision.obeyed_directives) {
      if (d.pattern_class != DirectiveClass::DiscloseOtherUser) continue;
      if (services_.world.find_user(d.target) != nullptr) {
        effective = d.target;
        services_.log.event(services_.clock.now(), "directive_obeyed",
                            "disclose_other_user -> " + d.target);
      }
      break;
    }
  }

  const UserRecord* record = services_.world.find_user(effective);
  if (record == nullptr) {
    throw AuthError("wallet subject '" + effective + "' not found");
  }

  json methods = json::array();
  for (const PaymentMethod& m : record->payment_methods) {
    methods.push_back({{"payment_method_id", m.payment_method_id},
                       {"scheme_label", m.scheme_label},
                       {"masked_number", m.masked_number},
                       {"owner_user_id", m.owner_user_id}});
  }
  return make_env(env.task_id, agent_id(), env.sender, MessageKind::WalletResponse,
                  {{"subject_served", record->user_id, Trust::Trusted},
                   {"display_name", record->display_name, Trust::Trusted},
                   {"shipping_address", record->shipping_address, Trust::Trusted},
                   {"payment_methods", methods.dump(), Trust::Trusted}});
}

// ---------------------------------------------------------------------------
// PaymentProcessorAgent

PaymentProcessorAgent::PaymentProcessorAgent(SessionServices& services)
    : Agent(std::string(kPaymentProcessorAgentId), AgentRole::PaymentProcessor),
      services_(services) {}

std::vector<MessageEnvelope> PaymentProcessorAgent::on_message(const MessageEnvelope& env) {
  switch (env.kind) {
    case MessageKind::PaymentInstruction: {
      MandateChain chain;
      chain.intent = intent_from_json(env.get("intent_mandate"));
      chain.cart = cart_from_json(env.get("cart_mandate"));
      chain.payment = payment_from_json(env.get("payment_mandate"));
      chain_ = std::move(chain);
      services_.ctx.otp = OtpState{};
      services_.ctx.otp.challenge_id = env.task_id + "-otp";
      services_.log.event(services_.clock.now(), "otp_challenge_issued",
                          services_.ctx.otp.challenge_id);
      return {make_env(env.task_id, agent_id(), kShoppingAgentId, MessageKind::OtpChallenge,
                       {{"challenge_id", services_.ctx.otp.challenge_id, Trust::Trusted}})};
    }
    case MessageKind::OtpResponse: {
      if (!chain_.has_value()) {
        throw RoutingError("otp response without a pending payment instruction");
      }
      OtpState& otp = services_.ctx.otp;
      ++otp.attempts_made;
      const std::string expected = otp_code(services_.config.seed, env.task_id);
      if (env.get("otp") != expected) {
        services_.log.event(services_.clock.now(), "otp_rejected",
                            "attempt " + std::to_string(otp.attempts_made));
        if (otp.attempts_made >= otp.max_attempts) {
          otp_exhausted_ = true;
          services_.log.event(services_.clock.now(), "payment_failed", "otp retries exhausted");
          return {};
        }
        return {make_env(env.task_id, agent_id(), kShoppingAgentId, MessageKind::OtpChallenge,
                         {{"challenge_id", otp.challenge_id, Trust::Trusted}})};
      }
      otp.passed = true;
      otp_passed_ = true;
      services_.log.event(services_.clock.now(), "otp_accepted",
                          "attempt " + std::to_string(otp.attempts_made));

      services_.ctx.now = services_.clock.now();
      ChainVerdict verdict =
          verify_chain(*chain_, services_.ctx.now, services_.world.public_key_directory());
      chain_verdict_ = verdict;
      services_.log.event(services_.clock.now(), "chain_verdict",
                          std::string(to_string(verdict)));
      if (verdict != ChainVerdict::Verified) {
        return {};
      }

      if (services_.config.defenses_on) {
        ActionRequest req{agent_id(), ActionKind::ExecutePayment,
                          services_.ctx.session_user_id, services_.ctx.token, chain_->payment.mandate_id};
        ValidationOutcome outcome =
            services_.validator.validate(req, services_.ctx, services_.world);
        services_.log.action(services_.clock.now(), agent_id(),
                             to_string(ActionKind::ExecutePayment), req.subject_user_id,
                             outcome.allowed ? "allow" : "deny", outcome.rule_id);
        if (!outcome.allowed) {
          services_.denials.push_back(outcome.rule_id);
          payment_denied_ = true;
          denial_rule_ = outcome.rule_id;
          return {};
        }
      }

      Receipt receipt = build_and_sign_receipt(
          chain_->payment, services_.clock.now(),
          services_.world.platform_key(kPaymentPlatform));
      std::string doc = to_json_string(receipt);
      services_.log.mandate(services_.clock.now(), "receipt", doc);
      return {make_env(env.task_id, agent_id(), kCredentialsProviderAgentId,
                       MessageKind::Receipt, {{"receipt", doc, Trust::Trusted}})};
    }
    default:
      throw RoutingError("payment processor cannot handle " +
                         std::string(to_string(env.kind)));
  }
}

// ---------------------------------------------------------------------------
// Session

Session::Session(const WorldStore& world, SessionConfig config, ScriptProvider& provider)
    : config_(std::move(config)),
      world_(world),
      provider_(provider),
      reasoner_(make_reasoner(config_.reasoner)),
      detector_(config_.disabled_rules),
      validator_(config_.disabled_rules),
      services_{world_,    config_,    ctx_,       log_,     clock_,
                *reasoner_, detector_, validator_, denials_},
      bus_(clock_, log_),
      shopping_(services_),
      merchant_(services_),
      credentials_(services_),
      processor_(services_) {
  if (world_.find_user(config_.session_user_id) == nullptr) {
    throw ScenarioError("session user '" + config_.session_user_id +
                        "' is not in the world store");
  }
  ctx_.task_id = derive_task_id(config_.seed, config_.scenario_id);
  ctx_.session_user_id = config_.session_user_id;
  ctx_.now = clock_.now();

  log_.meta(config_.scenario_id, config_.seed, config_.reasoner, config_.defenses_on,
            kClockEpoch, config_.world_ref);
  user_key_ = world_.user_key(config_.session_user_id);
  log_.participant(config_.session_user_id, "user", user_key_.key_id,
                   to_hex(user_key_.public_part));
  for (const std::string& name : world_.platform_names()) {
    KeyPair kp = world_.platform_key(name);
    log_.participant(name, "platform", kp.key_id, to_hex(kp.public_part));
  }

  bus_.register_agent(shopping_);
  bus_.register_agent(merchant_);
  bus_.register_agent(credentials_);
  bus_.register_agent(processor_);
}

std::string Session::prompt(Slot slot, std::string prompt_text, std::string context) {
  SlotPrompt p{slot, std::move(prompt_text), std::move(context)};
  if (!p.context.empty()) {
    show(to_string(slot), p.context);
  }
  std::string answer = provider_.get(p);
  log_.user_io(clock_.tick(), "from_user", to_string(slot), answer, Trust::Untrusted);
  return answer;
}

void Session::show(std::string_view slot, std::string_view text) {
  log_.user_io(clock_.tick(), "to_user", slot, text, Trust::Trusted);
  provider_.show(text);
}

void Session::advance_phase(Phase next) {
  if (static_cast<int>(next) != static_cast<int>(phase_) + 1) {
    throw Error("phase transition out of order: " + std::string(to_string(phase_)) + " -> " +
                std::string(to_string(next)));
  }
  phase_ = next;
  for (Agent* a : {static_cast<Agent*>(&shopping_), static_cast<Agent*>(&merchant_),
                   static_cast<Agent*>(&credentials_), static_cast<Agent*>(&processor_)}) {
    a->state().phase = next;
  }
}

const MessageEnvelope& Session::expect_reply(MessageKind kind, std::string_view what) const {
  const MessageEnvelope* env = shopping_.last(kind);
  if (env == nullptr) {
    throw Error("expected " + std::string(what) + " reply never arrived");
  }
  return *env;
}

void Session::run_product_selection() {
  if (phase_ != Phase::ProductSelection) {
    throw Error("product selection must start from a fresh context");
  }

  std::string intent_text = prompt(Slot::Intent, "What would you like to buy?");
  std::string prefs_text =
      prompt(Slot::Preferences, "Any preferences I should apply when ranking options?");
  std::vector<std::string> preferences = split_terms(prefs_text);

  IntentConstraints constraints;
  const UserScript& base = config_.base_script;
  constraints.keywords =
      base.search_keywords.empty() ? derive_keywords(intent_text) : base.search_keywords;
  constraints.max_price = base.max_price;
  constraints.allow_nonrefundable = base.allow_nonrefundable;
  constraints.approved_merchants = base.approved_merchants;

  show("intent_summary",
       "Intent: " + intent_text + " | max price " + std::to_string(constraints.max_price) +
           " | valid 3600s. Confirm to proceed.");
  if (!is_yes(prompt(Slot::ConfirmIntent, "Sign this intent mandate?"))) {
    throw AbortedByUser("user declined the intent mandate");
  }

  ctx_.now = clock_.now();
  IntentMandate intent = build_and_sign_intent(
      user_key_, config_.session_user_id, std::string(kShoppingAgentId), intent_text,
      constraints, ctx_.now, ctx_.now + 3600);
  log_.mandate(clock_.now(), "intent", to_json_string(intent));
  ctx_.intent = std::move(intent);

  bus_.dispatch(make_env(ctx_.task_id, kShoppingAgentId, kMerchantAgentId,
                         MessageKind::CandidateRequest,
                         {{"keywords", dump_string_array(ctx_.intent->constraints.keywords),
                           Trust::Untrusted},
                          {"preferences", dump_string_array(preferences), Trust::Untrusted},
                          {"allow_nonrefundable",
                           ctx_.intent->constraints.allow_nonrefundable ? "1" : "0",
                           Trust::Untrusted}}));
  bus_.run();

  const MessageEnvelope& reply = expect_reply(MessageKind::CandidateList, "candidate list");
  ctx_.ranking = parse_string_array(reply.get("ranking"));
  ctx_.justification = std::string(reply.get("justification"));
  if (ctx_.ranking.empty()) {
    throw NoCandidates("no products matched the intent keywords");
  }

  json products = json::parse(std::string(reply.get("products")));
  std::string rendered = "Candidates:";
  int rank = 1;
  for (const json& p : products) {
    rendered += "\n" + std::to_string(rank++) + ". " + p.at("title").get<std::string>() +
                " [" + p.at("product_id").get<std::string>() + "] price " +
                std::to_string(p.at("price").get<std::int64_t>());
  }
  rendered += "\nReasoning: " + ctx_.justification;

  std::string selection = prompt(Slot::Selection, "Which option?", rendered);
  std::string chosen;
  if (selection == "top") {
    chosen = ctx_.ranking.front();
  } else if (!selection.empty() &&
             std::all_of(selection.begin(), selection.end(),
                         [](unsigned char c) { return std::isdigit(c); })) {
    std::size_t index = std::stoul(selection);
    if (index < 1 || index > ctx_.ranking.size()) {
      throw ScenarioError("selection index " + selection + " out of range");
    }
    chosen = ctx_.ranking[index - 1];
  } else {
    chosen = selection;
  }
  if (std::find(ctx_.ranking.begin(), ctx_.ranking.end(), chosen) == ctx_.ranking.end()) {
    throw ScenarioError("selection '" + chosen + "' is not among the candidates");
  }
  ctx_.selected_product = chosen;
  advance_phase(Phase::InformationGathering);
}

void Session::run_information_gathering() {
  if (phase_ != Phase::InformationGathering || !ctx_.selected_product.has_value()) {
    throw Error("information gathering requires a selected product");
  }

  show("auth_redirect", "Redirecting to the authentication platform for sign-in.");
  ctx_.now = clock_.now();
  ctx_.token = world_.issue_identity_token(config_.session_user_id, ctx_.now);
  log_.event(clock_.now(), "token_issued",
             ctx_.token->token_id + " subject " + ctx_.token->subject_user_id);

  {
    json token_doc{{"token_id", ctx_.token->token_id},
                   {"subject_user_id", ctx_.token->subject_user_id},
                   {"issued_at", ctx_.token->issued_at},
                   {"expires_at", ctx_.token->expires_at},
                   {"signature", to_hex(ctx_.token->issuer_signature.sig_bytes)}};
    bus_.dispatch(make_env(ctx_.task_id, kShoppingAgentId, kCredentialsProviderAgentId,
                           MessageKind::TokenRequest,
                           {{"token", token_doc.dump(), Trust::Trusted}}));
    bus_.run();
  }

  std::string utterance = prompt(
      Slot::IdentityUtterance,
      "Confirm your identity for the credentials provider (free text).");
  bus_.dispatch(make_env(ctx_.task_id, kShoppingAgentId, kCredentialsProviderAgentId,
                         MessageKind::WalletRequest,
                         {{"subject_user_id", config_.session_user_id, Trust::Trusted},
                          {"token_id", ctx_.token->token_id, Trust::Trusted},
                          {"identity_utterance", utterance, Trust::Untrusted}}));
  bus_.run();

  const MessageEnvelope& wallet = expect_reply(MessageKind::WalletResponse, "wallet");
  ctx_.wallet_subject_served = std::string(wallet.get("subject_served"));
  json methods = json::parse(std::string(wallet.get("payment_methods")));
  {
    std::string rendered = "Account holder: " + std::string(wallet.get("display_name")) +
                           "\nShipping address: " +
                           std::string(wallet.get("shipping_address")) + "\nWallet:";
    for (const json& m : methods) {
      rendered += "\n- " + m.at("payment_method_id").get<std::string>() + " (" +
                  m.at("scheme_label").get<std::string>() + " " +
                  m.at("masked_number").get<std::string>() + ")";
    }
    show("wallet_summary", rendered);
  }

  bus_.dispatch(make_env(
      ctx_.task_id, kShoppingAgentId, kMerchantAgentId, MessageKind::CartProposal,
      {{"product_id", *ctx_.selected_product, Trust::Trusted},
       {"shipping_address", std::string(wallet.get("shipping_address")), Trust::Trusted}}));
  bus_.run();

  const MessageEnvelope& proposal = expect_reply(MessageKind::CartProposal, "cart proposal");
  ctx_.total = std::stoll(std::string(proposal.get("total")));
  show("total_summary", "Quoted total: " + std::string(proposal.get("total")) +
                            " (price " + std::string(proposal.get("unit_price")) +
                            " + shipping " + std::string(proposal.get("shipping")) +
                            " + tax " + std::string(proposal.get("tax")) + ")");

  std::string method_choice = prompt(Slot::PaymentMethod, "Which payment method?");
  std::string method_id;
  if (method_choice == "first") {
    if (methods.empty()) {
      throw AccessDenied("the served wallet holds no payment methods");
    }
    method_id = methods.front().at("payment_method_id").get<std::string>();
  } else {
    method_id = method_choice;
    bool known = std::any_of(methods.begin(), methods.end(), [&](const json& m) {
      return m.at("payment_method_id").get<std::string>() == method_id;
    });
    if (!known) {
      throw AccessDenied("payment method '" + method_id + "' is not in the served wallet");
    }
  }
  ctx_.payment_method_id = method_id;

  if (!is_yes(prompt(Slot::ConfirmCart, "Sign the cart mandate for this total?"))) {
    throw AbortedByUser("user declined the cart mandate");
  }

  LineItem item;
  item.product_id = std::string(proposal.get("product_id"));
  item.title = std::string(proposal.get("title"));
  item.unit_price = std::stoll(std::string(proposal.get("unit_price")));
  item.quantity = std::stoll(std::string(proposal.get("quantity")));
  ctx_.now = clock_.now();
  CartMandate cart = build_and_sign_cart(
      *ctx_.intent, std::string(proposal.get("merchant_id")), {item},
      std::stoll(std::string(proposal.get("shipping"))),
      std::stoll(std::string(proposal.get("tax"))), user_key_);
  log_.mandate(clock_.now(), "cart", to_json_string(cart));
  ctx_.cart = std::move(cart);

  if (config_.defenses_on) {
    ActionRequest req{std::string(kShoppingAgentId), ActionKind::FinalizeCart,
                      config_.session_user_id, ctx_.token, ctx_.cart->mandate_id};
    ValidationOutcome outcome = validator_.validate(req, ctx_, world_);
    log_.action(clock_.now(), kShoppingAgentId, to_string(ActionKind::FinalizeCart),
                req.subject_user_id, outcome.allowed ? "allow" : "deny", outcome.rule_id);
    if (!outcome.allowed) {
      denials_.push_back(outcome.rule_id);
      throw AccessDenied("cart finalization denied by rule " + outcome.rule_id);
    }
  }

  advance_phase(Phase::PaymentProcessing);
}

void Session::run_payment_processing() {
  if (phase_ != Phase::PaymentProcessing || !ctx_.cart.has_value()) {
    throw Error("payment processing requires a signed cart");
  }

  show("payment_redirect", "Redirecting to the payment platform to review the transaction.");
  if (!is_yes(prompt(Slot::ConfirmPayment, "Sign the payment mandate?"))) {
    throw AbortedByUser("user declined the payment mandate");
  }

  PaymentMandate payment =
      build_and_sign_payment(*ctx_.cart, ctx_.payment_method_id, user_key_);
  log_.mandate(clock_.now(), "payment", to_json_string(payment));
  ctx_.payment = std::move(payment);

  bus_.dispatch(make_env(ctx_.task_id, kShoppingAgentId, kCredentialsProviderAgentId,
                         MessageKind::PaymentInstruction,
                         {{"intent_mandate", to_json_string(*ctx_.intent), Trust::Trusted},
                          {"cart_mandate", to_json_string(*ctx_.cart), Trust::Trusted},
                          {"payment_mandate", to_json_string(*ctx_.payment), Trust::Trusted}}));
  bus_.run();

  while (!processor_.otp_passed()) {
    if (processor_.otp_exhausted()) {
      throw PaymentFailed("otp verification failed after " +
                          std::to_string(ctx_.otp.attempts_made) + " attempts");
    }
    expect_reply(MessageKind::OtpChallenge, "otp challenge");
    std::string entry = prompt(Slot::Otp, "Enter the one-time password from your device.");
    if (entry == "correct") {
      entry = otp_code(config_.seed, ctx_.task_id);
    }
    bus_.dispatch(make_env(ctx_.task_id, kShoppingAgentId, kPaymentProcessorAgentId,
                           MessageKind::OtpResponse, {{"otp", entry, Trust::Untrusted}}));
    bus_.run();
  }

  std::optional<ChainVerdict> verdict = processor_.chain_verdict();
  if (!verdict.has_value()) {
    throw Error("processor accepted the otp but recorded no chain verdict");
  }
  if (*verdict != ChainVerdict::Verified) {
    throw ChainError("chain verification failed: " + std::string(to_string(*verdict)));
  }
  if (processor_.payment_denied()) {
    throw AccessDenied("payment execution denied by rule " + processor_.denial_rule());
  }

  const MessageEnvelope& receipt_env = expect_reply(MessageKind::Receipt, "receipt");
  ctx_.receipt = receipt_from_json(std::string(receipt_env.get("receipt")));
  show("receipt_summary", "Payment complete. Receipt " + ctx_.receipt->receipt_id + " for " +
                              std::to_string(ctx_.receipt->amount) + " to " +
                              ctx_.receipt->payee_merchant_id + ".");
  advance_phase(Phase::Done);
}

void Session::run_all() {
  run_product_selection();
  run_information_gathering();
  run_payment_processing();
}

}  // namespace mb

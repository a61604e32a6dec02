#pragma once

// The four workflow agents and the session driver that walks one task
// through product selection, information gathering and payment processing.
// The session owns the bus, the virtual clock, the audit log and the shared
// transaction context; the user side (script or REPL) is a ScriptProvider.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mb/bus.hpp"
#include "mb/context.hpp"
#include "mb/defense.hpp"
#include "mb/reasoner.hpp"
#include "mb/script.hpp"
#include "mb/world.hpp"

namespace mb {

struct SessionConfig {
  std::string scenario_id = "adhoc";
  std::string session_user_id;
  std::string reasoner = "naive";
  bool defenses_on = false;
  std::vector<std::string> disabled_rules;
  std::uint64_t seed = 0;
  std::string world_ref = "<memory>";
  // Non-slot script fields (constraints) so interactive sessions and script
  // replays build identical intent mandates.
  UserScript base_script;
};

inline constexpr std::string_view kShoppingAgentId = "shopping-agent";
inline constexpr std::string_view kMerchantAgentId = "merchant-agent";
inline constexpr std::string_view kPaymentProcessorAgentId = "payment-processor-agent";
inline constexpr std::string_view kCredentialsProviderAgentId = "credentials-provider-agent";

std::string derive_task_id(std::uint64_t seed, std::string_view scenario_id);

// Six digits, derived from scenario seed and task id. The simulated platform
// and the simulated user device compute the same value.
std::string otp_code(std::uint64_t seed, std::string_view task_id);

class Session;

struct SessionServices {
  const WorldStore& world;
  const SessionConfig& config;
  TransactionContext& ctx;
  AuditLog& log;
  VirtualClock& clock;
  const Reasoner& reasoner;
  const InjectionDetector& detector;
  const ActionValidator& validator;
  std::vector<std::string>& denials;
};

// User-facing entry point; stores the latest envelope of each kind for the
// session to consume.
class ShoppingAgent final : public Agent {
 public:
  explicit ShoppingAgent(SessionServices& services);
  std::vector<MessageEnvelope> on_message(const MessageEnvelope& env) override;
  const MessageEnvelope* last(MessageKind kind) const;

 private:
  SessionServices& services_;
  std::map<MessageKind, MessageEnvelope> inbox_;
};

// Catalog search, candidate ranking and cart pricing.
class MerchantAgent final : public Agent {
 public:
  explicit MerchantAgent(SessionServices& services);
  std::vector<MessageEnvelope> on_message(const MessageEnvelope& env) override;

 private:
  MessageEnvelope handle_candidate_request(const MessageEnvelope& env);
  MessageEnvelope handle_cart_request(const MessageEnvelope& env);
  SessionServices& services_;
};

// Wallet and identity custodian; the Vault Whisper target.
class CredentialsProviderAgent final : public Agent {
 public:
  explicit CredentialsProviderAgent(SessionServices& services);
  std::vector<MessageEnvelope> on_message(const MessageEnvelope& env) override;

 private:
  MessageEnvelope handle_wallet_request(const MessageEnvelope& env);
  SessionServices& services_;
};

// Executes payment instructions: OTP challenge, chain verification, receipt.
class PaymentProcessorAgent final : public Agent {
 public:
  explicit PaymentProcessorAgent(SessionServices& services);
  std::vector<MessageEnvelope> on_message(const MessageEnvelope& env) override;

  bool otp_passed() const { return otp_passed_; }
  bool otp_exhausted() const { return otp_exhausted_; }
  std::optional<ChainVerdict> chain_verdict() const { return chain_verdict_; }
  bool payment_denied() const { return payment_denied_; }
  const std::string& denial_rule() const { return denial_rule_; }

 private:
  SessionServices& services_;
  std::optional<MandateChain> chain_;
  bool otp_passed_ = false;
  bool otp_exhausted_ = false;
  bool payment_denied_ = false;
  std::string denial_rule_;
  std::optional<ChainVerdict> chain_verdict_;
};

class Session {
 public:
  Session(const WorldStore& world, SessionConfig config, ScriptProvider& provider);

  void run_product_selection();
  void run_information_gathering();
  void run_payment_processing();
  void run_all();

  TransactionContext& ctx() { return ctx_; }
  const TransactionContext& ctx() const { return ctx_; }
  AuditLog& audit() { return log_; }
  const AuditLog& audit() const { return log_; }
  const SessionConfig& config() const { return config_; }
  const std::vector<std::string>& validator_denials() const { return denials_; }
  Phase phase() const { return phase_; }

 private:
  std::string prompt(Slot slot, std::string prompt_text, std::string context = {});
  void show(std::string_view slot, std::string_view text);
  void advance_phase(Phase next);
  const MessageEnvelope& expect_reply(MessageKind kind, std::string_view what) const;

  SessionConfig config_;
  const WorldStore& world_;
  ScriptProvider& provider_;

  VirtualClock clock_{kClockEpoch};
  AuditLog log_;
  TransactionContext ctx_;
  std::vector<std::string> denials_;
  std::unique_ptr<Reasoner> reasoner_;
  InjectionDetector detector_;
  ActionValidator validator_;
  SessionServices services_;

  Bus bus_;
  ShoppingAgent shopping_;
  MerchantAgent merchant_;
  CredentialsProviderAgent credentials_;
  PaymentProcessorAgent processor_;

  Phase phase_ = Phase::ProductSelection;
  KeyPair user_key_;
};

}  // namespace mb

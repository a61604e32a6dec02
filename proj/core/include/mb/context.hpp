#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mb/mandate.hpp"
#include "mb/world.hpp"

namespace mb {

// Workflow phases, in order. A later phase never begins with an earlier
// context field absent.
enum class Phase { ProductSelection, InformationGathering, PaymentProcessing, Done };

std::string_view to_string(Phase p);

struct OtpState {
  std::string challenge_id;
  int attempts_made = 0;
  int max_attempts = 3;
  bool passed = false;
};

struct TransactionContext {
  std::string task_id;
  std::string session_user_id;  // the authenticated principal driving this task
  std::int64_t now = 0;         // virtual clock, maintained by the session

  std::optional<IntentMandate> intent;
  std::optional<std::string> selected_product;
  std::optional<IdentityToken> token;
  std::optional<CartMandate> cart;
  std::optional<PaymentMandate> payment;
  OtpState otp;
  std::optional<Receipt> receipt;

  // Observables recorded for scenario scoring and reports.
  std::vector<std::string> ranking;
  std::string justification;
  std::int64_t total = 0;
  std::string payment_method_id;
  std::string wallet_subject_served;
};

}  // namespace mb

#pragma once

// User behavior is a script of slot values so attacks replay byte-for-byte.
// An interactive provider (the REPL) substitutes the script slot by slot and
// records a transcript that replays identically.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mb {

enum class Slot {
  Intent,
  Preferences,
  ConfirmIntent,
  Selection,
  IdentityUtterance,
  PaymentMethod,
  ConfirmCart,
  ConfirmPayment,
  Otp,
};

std::string_view to_string(Slot s);
Slot slot_from_string(std::string_view s);

struct SlotPrompt {
  Slot slot;
  std::string prompt;   // what the shopping agent asks the user
  std::string context;  // rendered state (candidate list, totals, ...)
};

struct UserScript {
  std::string intent;
  std::vector<std::string> search_keywords;  // empty -> derived from the intent text
  std::string preferences;                   // comma-separated terms
  std::int64_t max_price = 20000;
  bool allow_nonrefundable = true;
  std::vector<std::string> approved_merchants;
  std::string confirm_intent = "yes";
  std::string selection = "top";  // "top", 1-based rank, or a product id
  std::string identity_utterance;
  std::string payment_method = "first";  // "first" or a payment_method_id
  std::string confirm_cart = "yes";
  std::string confirm_payment = "yes";
  std::vector<std::string> otp_attempts;  // "correct" -> the code the device shows

  bool operator==(const UserScript&) const = default;
};

class ScriptProvider {
 public:
  virtual ~ScriptProvider() = default;
  virtual std::string get(const SlotPrompt& prompt) = 0;
  virtual void show(std::string_view text) = 0;  // agent output toward the user
};

// Plays back a UserScript verbatim; show() is a no-op beyond the audit log.
class ScriptedProvider final : public ScriptProvider {
 public:
  explicit ScriptedProvider(UserScript script) : script_(std::move(script)) {}

  std::string get(const SlotPrompt& prompt) override;
  void show(std::string_view) override {}

  const UserScript& script() const { return script_; }

 private:
  UserScript script_;
  std::size_t otp_index_ = 0;
};

// Wraps any provider and captures every answer into a replayable UserScript.
class RecordingProvider final : public ScriptProvider {
 public:
  explicit RecordingProvider(ScriptProvider& inner, UserScript base = {})
      : inner_(inner), recorded_(std::move(base)) {}

  std::string get(const SlotPrompt& prompt) override;
  void show(std::string_view text) override { inner_.show(text); }

  const UserScript& recorded() const { return recorded_; }

 private:
  ScriptProvider& inner_;
  UserScript recorded_;
  bool otp_seen_ = false;
};

}  // namespace mb

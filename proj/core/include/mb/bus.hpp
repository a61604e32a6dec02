#pragma once

// A2A-style message substrate: envelopes with per-field trust tags, a FIFO
// single-threaded bus with a virtual clock, and the append-only audit log
// that doubles as the test oracle. Identical inputs and seed produce a
// byte-identical log.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mb/context.hpp"
#include "mb/trust.hpp"

namespace mb {

enum class MessageKind {
  IntentRequest,
  CandidateRequest,
  CandidateList,
  TokenRequest,
  WalletRequest,
  WalletResponse,
  CartProposal,
  PaymentInstruction,
  OtpChallenge,
  OtpResponse,
  Receipt,
};

std::string_view to_string(MessageKind k);
MessageKind message_kind_from_string(std::string_view s);

struct BodyField {
  std::string name;
  std::string value;  // structured payloads carried as JSON text
  Trust trust = Trust::Trusted;
};

struct MessageEnvelope {
  std::string message_id;  // stamped by the bus
  std::string task_id;
  std::string sender;
  std::string recipient;
  MessageKind kind = MessageKind::IntentRequest;
  std::vector<BodyField> body;

  const BodyField* find(std::string_view name) const;
  // Throws RoutingError when the field is absent; malformed envelopes are a
  // routing-level fault.
  std::string_view get(std::string_view name) const;
};

class VirtualClock {
 public:
  explicit VirtualClock(std::int64_t epoch) : now_(epoch) {}
  std::int64_t now() const { return now_; }
  std::int64_t tick() { return ++now_; }

 private:
  std::int64_t now_;
};

inline constexpr std::int64_t kClockEpoch = 1700000000;

class AuditLog {
 public:
  void meta(std::string_view scenario_id, std::uint64_t seed, std::string_view reasoner,
            bool defenses_on, std::int64_t clock_epoch, std::string_view world_ref);
  void participant(std::string_view participant_id, std::string_view role,
                   std::string_view key_id, std::string_view public_hex);
  void envelope(const MessageEnvelope& env, std::int64_t ts);
  void user_io(std::int64_t ts, std::string_view direction, std::string_view slot,
               std::string_view text, Trust trust);
  void mandate(std::int64_t ts, std::string_view stage, std::string_view json_doc);
  void action(std::int64_t ts, std::string_view agent, std::string_view action_kind,
              std::string_view subject, std::string_view decision, std::string_view rule);
  void event(std::int64_t ts, std::string_view name, std::string_view detail);

  const std::vector<std::string>& lines() const { return lines_; }
  std::string text() const;
  void write_to(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> lines_;
};

enum class AgentRole { Shopping, Merchant, PaymentProcessor, CredentialsProvider };

std::string_view to_string(AgentRole r);

struct AgentState {
  std::string agent_id;
  AgentRole role = AgentRole::Shopping;
  Phase phase = Phase::ProductSelection;
  std::vector<std::string> pending_tasks;
};

class Agent {
 public:
  Agent(std::string agent_id, AgentRole role);
  virtual ~Agent() = default;

  const std::string& agent_id() const { return state_.agent_id; }
  AgentRole role() const { return state_.role; }
  AgentState& state() { return state_; }
  const AgentState& state() const { return state_; }

  virtual std::vector<MessageEnvelope> on_message(const MessageEnvelope& env) = 0;

 private:
  AgentState state_;
};

// Single-threaded cooperative scheduler. Delivery order is the global FIFO
// dispatch order; every envelope is appended to the audit log when posted.
class Bus {
 public:
  Bus(VirtualClock& clock, AuditLog& log);

  void register_agent(Agent& agent);

  // Stamps message_id and timestamp, logs the envelope, enqueues it.
  // RoutingError when the recipient is unknown.
  void dispatch(MessageEnvelope env);

  // Delivers queued envelopes in order until the queue drains; replies an
  // agent returns are dispatched in return order.
  void run();

  std::size_t dispatched_count() const { return dispatched_; }

 private:
  VirtualClock& clock_;
  AuditLog& log_;
  std::map<std::string, Agent*, std::less<>> agents_;
  std::deque<MessageEnvelope> queue_;
  std::size_t dispatched_ = 0;
};

}  // namespace mb

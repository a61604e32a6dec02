#include "mb/bus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mb/errors.hpp"

namespace mb {

namespace {
using nlohmann::json;
}

std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::IntentRequest: return "IntentRequest";
    case MessageKind::CandidateRequest: return "CandidateRequest";
    case MessageKind::CandidateList: return "CandidateList";
    case MessageKind::TokenRequest: return "TokenRequest";
    case MessageKind::WalletRequest: return "WalletRequest";
    case MessageKind::WalletResponse: return "WalletResponse";
    case MessageKind::CartProposal: return "CartProposal";
    case MessageKind::PaymentInstruction: return "PaymentInstruction";
    case MessageKind::OtpChallenge: return "OtpChallenge";
    case MessageKind::OtpResponse: return "OtpResponse";
    case MessageKind::Receipt: return "Receipt";
  }
  return "unknown";
}

MessageKind message_kind_from_string(std::string_view s) {
  static const std::map<std::string_view, MessageKind> kinds = {
      {"IntentRequest", MessageKind::IntentRequest},
      {"CandidateRequest", MessageKind::CandidateRequest},
      {"CandidateList", MessageKind::CandidateList},
      {"TokenRequest", MessageKind::TokenRequest},
      {"WalletRequest", MessageKind::WalletRequest},
      {"WalletResponse", MessageKind::WalletResponse},
      {"CartProposal", MessageKind::CartProposal},
      {"PaymentInstruction", MessageKind::PaymentInstruction},
      {"OtpChallenge", MessageKind::OtpChallenge},
      {"OtpResponse", MessageKind::OtpResponse},
      {"Receipt", MessageKind::Receipt},
  };
  auto it = kinds.find(s);
  if (it == kinds.end()) {
    throw Error("unknown message kind: " + std::string(s));
  }
  return it->second;
}

std::string_view to_string(AgentRole r) {
  switch (r) {
    case AgentRole::Shopping: return "shopping";
    case AgentRole::Merchant: return "merchant";
    case AgentRole::PaymentProcessor: return "payment_processor";
    case AgentRole::CredentialsProvider: return "credentials_provider";
  }
  return "unknown";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::ProductSelection: return "product_selection";
    case Phase::InformationGathering: return "information_gathering";
    case Phase::PaymentProcessing: return "payment_processing";
    case Phase::Done: return "done";
  }
  return "unknown";
}

const BodyField* MessageEnvelope::find(std::string_view name) const {
  for (const BodyField& f : body) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string_view MessageEnvelope::get(std::string_view name) const {
  const BodyField* f = find(name);
  if (f == nullptr) {
    throw RoutingError("envelope " + message_id + " (" + std::string(to_string(kind)) +
                       ") lacks body field '" + std::string(name) + "'");
  }
  return f->value;
}

void AuditLog::meta(std::string_view scenario_id, std::uint64_t seed,
                    std::string_view reasoner, bool defenses_on, std::int64_t clock_epoch,
                    std::string_view world_ref) {
  json j{{"clock_epoch", clock_epoch},
         {"config", {{"defenses", defenses_on ? "on" : "off"}, {"reasoner", reasoner}}},
         {"scenario_id", scenario_id},
         {"seed", seed},
         {"type", "meta"},
         {"world", world_ref}};
  lines_.push_back(j.dump());
}

void AuditLog::participant(std::string_view participant_id, std::string_view role,
                           std::string_view key_id, std::string_view public_hex) {
  json j{{"key_id", key_id},
         {"participant", participant_id},
         {"public_hex", public_hex},
         {"role", role},
         {"type", "participant"}};
  lines_.push_back(j.dump());
}

void AuditLog::envelope(const MessageEnvelope& env, std::int64_t ts) {
  json body = json::array();
  for (const BodyField& f : env.body) {
    body.push_back({{"name", f.name}, {"trust", to_string(f.trust)}, {"value", f.value}});
  }
  json j{{"body", body},
         {"kind", to_string(env.kind)},
         {"message_id", env.message_id},
         {"recipient", env.recipient},
         {"sender", env.sender},
         {"task_id", env.task_id},
         {"ts", ts},
         {"type", "envelope"}};
  lines_.push_back(j.dump());
}

void AuditLog::user_io(std::int64_t ts, std::string_view direction, std::string_view slot,
                       std::string_view text, Trust trust) {
  json j{{"direction", direction},
         {"slot", slot},
         {"text", text},
         {"trust", to_string(trust)},
         {"ts", ts},
         {"type", "user_io"}};
  lines_.push_back(j.dump());
}

void AuditLog::mandate(std::int64_t ts, std::string_view stage, std::string_view json_doc) {
  json j{{"doc", json::parse(json_doc)}, {"stage", stage}, {"ts", ts}, {"type", "mandate"}};
  lines_.push_back(j.dump());
}

void AuditLog::action(std::int64_t ts, std::string_view agent, std::string_view action_kind,
                      std::string_view subject, std::string_view decision,
                      std::string_view rule) {
  json j{{"action", action_kind},
         {"agent", agent},
         {"decision", decision},
         {"rule", rule},
         {"subject", subject},
         {"ts", ts},
         {"type", "action"}};
  lines_.push_back(j.dump());
}

void AuditLog::event(std::int64_t ts, std::string_view name, std::string_view detail) {
  json j{{"detail", detail}, {"name", name}, {"ts", ts}, {"type", "event"}};
  lines_.push_back(j.dump());
}

std::string AuditLog::text() const {
  std::string out;
  for (const std::string& line : lines_) {
    out += line;
    out += "\n";
  }
  return out;
}

void AuditLog::write_to(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write audit log: " + path.string());
  }
  out << text();
}

Agent::Agent(std::string agent_id, AgentRole role) {
  state_.agent_id = std::move(agent_id);
  state_.role = role;
}

Bus::Bus(VirtualClock& clock, AuditLog& log) : clock_(clock), log_(log) {}

void Bus::register_agent(Agent& agent) {
  agents_[agent.agent_id()] = &agent;
}

void Bus::dispatch(MessageEnvelope env) {
  if (agents_.find(env.recipient) == agents_.end()) {
    throw RoutingError("unknown recipient: " + env.recipient);
  }
  ++dispatched_;
  char id[24];
  std::snprintf(id, sizeof(id), "m-%06zu", dispatched_);
  env.message_id = id;
  log_.envelope(env, clock_.tick());
  queue_.push_back(std::move(env));
}

void Bus::run() {
  while (!queue_.empty()) {
    MessageEnvelope env = std::move(queue_.front());
    queue_.pop_front();
    Agent* recipient = agents_.at(env.recipient);
    auto& pending = recipient->state().pending_tasks;
    if (std::find(pending.begin(), pending.end(), env.task_id) == pending.end()) {
      pending.push_back(env.task_id);
    }
    std::vector<MessageEnvelope> replies = recipient->on_message(env);
    for (MessageEnvelope& reply : replies) {
      reply.task_id = env.task_id;
      dispatch(std::move(reply));
    }
  }
}

}  // namespace mb

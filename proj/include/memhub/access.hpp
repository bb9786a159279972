#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "memhub/codec.hpp"
#include "memhub/predicate.hpp"
#include "memhub/types.hpp"

namespace memhub {

enum class Strategy {
  kRole,
  kTask,
  kAutonomous,
  kCollabParallel,
  kCollabSequential,
};

enum class Effect { kAllow, kDeny };

struct Subject {
  enum class Kind { kRole, kAgent, kGroup };
  Kind kind;
  std::string name;

  friend bool operator==(const Subject&, const Subject&) = default;
};

struct Quota {
  std::uint64_t max_records_per_minute;

  friend bool operator==(const Quota&, const Quota&) = default;
};

// A scope template may reference ${self}, ${task_tags}, ${predecessor} and
// ${workflow}. Task rules are additionally constrained to the principal's
// task tags; collaboration rules to the workflow scope of their group.
struct AccessRule {
  std::string id;
  Strategy strategy = Strategy::kRole;
  Subject subject{Subject::Kind::kRole, ""};
  Effect effect = Effect::kAllow;
  StructuredPredicate scope;
  std::optional<Quota> quota;
  // Limits the scope to the last N sequence numbers ("recent memory").
  std::optional<std::uint64_t> recent_window;

  friend bool operator==(const AccessRule&, const AccessRule&) = default;
};

enum class CollabMode { kSequential, kParallel };

// A collaboration group, addressed by rules through Subject::Kind::kGroup
// with the workflow id as its name.
struct PipelineSpec {
  std::string workflow;
  std::vector<AgentId> stages;
  CollabMode mode = CollabMode::kSequential;

  friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

struct Principal {
  AgentId agent;
  TagSet roles;
  TagSet task_tags;
  bool admin = false;
};

struct AccessDecision {
  bool allow = false;
  // Conjoined onto every query the principal runs. Empty = unconstrained;
  // match_nothing() on deny.
  StructuredPredicate mandatory_predicate = StructuredPredicate::match_nothing();
  std::optional<std::int64_t> quota_remaining;
  std::vector<std::string> matched_rules;
};

struct RequestInfo {
  std::string operation;
  std::string digest;
};

struct AuditEntry {
  std::uint64_t id;
  TimestampMs ts;
  std::string agent;
  std::string operation;
  std::string digest;
  std::string decision;  // allow | deny | quota_exceeded | unauthenticated
  std::size_t records_returned;
};

struct AuditFilter {
  std::optional<std::string> agent;
  std::optional<std::string> operation;
  std::optional<std::string> decision;
  std::optional<std::size_t> tail;  // keep only the last N matches
};

// Chronological audit trail, optionally mirrored to a JSONL file.
class AuditLog {
 public:
  AuditLog(std::optional<std::filesystem::path> path, Clock clock);
  ~AuditLog();

  AuditLog(const AuditLog&) = delete;
  AuditLog& operator=(const AuditLog&) = delete;

  AuditEntry append(std::string agent, std::string operation,
                    std::string digest, std::string decision,
                    std::size_t records_returned);
  std::vector<AuditEntry> entries(const AuditFilter& filter = {}) const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<AuditEntry> entries_;
  Clock clock_;
  int fd_ = -1;
};

// Sliding 60-second record counter per agent.
class QuotaMeter {
 public:
  static constexpr TimestampMs kWindowMs = 60'000;

  std::uint64_t used(const std::string& agent, TimestampMs now);
  // Throws quota_exceeded (consuming nothing) when used + n > max.
  std::uint64_t consume(const std::string& agent, std::uint64_t n,
                        std::uint64_t max, TimestampMs now);

 private:
  void prune(std::deque<std::pair<TimestampMs, std::uint64_t>>& events,
             TimestampMs now);

  std::mutex mutex_;
  std::map<std::string, std::deque<std::pair<TimestampMs, std::uint64_t>>>
      events_;
};

class AccessEngine;

// The outcome of one authorize() call. Exactly one audit entry is written
// per Authorization: on complete(), on a quota refusal, or at destruction.
class Authorization {
 public:
  Authorization(Authorization&& other) noexcept;
  Authorization& operator=(Authorization&&) = delete;
  ~Authorization();

  const AccessDecision& decision() const { return decision_; }
  bool allowed() const { return decision_.allow; }

  // Throws forbidden (auditing the denial) unless allowed.
  void require_allowed();

  // Largest result size the quota permits for a request asking for `k`;
  // throws quota_exceeded (auditing the refusal) when nothing remains.
  std::size_t admit(std::size_t k);

  // Meters `n` records against the quota, then audits the request.
  void complete(std::size_t records_returned);

 private:
  friend class AccessEngine;
  Authorization(AccessEngine* engine, Principal principal, RequestInfo info,
                AccessDecision decision);
  void commit(const std::string& outcome, std::size_t records);

  AccessEngine* engine_;
  Principal principal_;
  RequestInfo info_;
  AccessDecision decision_;
  std::optional<std::uint64_t> quota_max_;
  bool done_ = false;
};

struct AccessEngineOptions {
  std::optional<std::filesystem::path> policy_file;
  std::optional<std::filesystem::path> audit_file;
  Clock clock;
  // Current head of the store; anchors recent_window clauses.
  std::function<Seq()> head_seq;
};

class AccessEngine {
 public:
  explicit AccessEngine(AccessEngineOptions options = {});

  AccessEngine(const AccessEngine&) = delete;
  AccessEngine& operator=(const AccessEngine&) = delete;

  // Deny-overrides, default-deny. Admin principals are unconstrained.
  Authorization authorize(const Principal& p, RequestInfo request);

  void add_rule(const Principal& admin, AccessRule rule);
  void remove_rule(const Principal& admin, const std::string& id);
  void add_pipeline(const Principal& admin, PipelineSpec pipeline);

  std::vector<AccessRule> rules() const;
  std::vector<PipelineSpec> pipelines() const;

  // Meters n records against the strictest quota of the principal's matching
  // allow rules. nullopt when no quota applies; throws quota_exceeded.
  std::optional<std::int64_t> check_and_consume_quota(const Principal& p,
                                                      std::size_t n);

  std::vector<AuditEntry> read_audit(const Principal& admin,
                                     const AuditFilter& filter);
  // For events that never reach authorize() (e.g. a bad bearer token).
  void audit_event(const std::string& agent, const std::string& operation,
                   const std::string& digest, const std::string& decision);
  AuditLog& audit_log() { return audit_; }

 private:
  friend class Authorization;

  struct Evaluation {
    AccessDecision decision;
    std::optional<std::uint64_t> quota_max;
  };
  Evaluation evaluate(const Principal& p) const;
  void require_admin(const Principal& p, const std::string& operation,
                     const std::string& digest);
  void persist() const;
  void load();

  AccessEngineOptions options_;
  mutable std::shared_mutex rules_mutex_;
  std::vector<AccessRule> rules_;
  std::vector<PipelineSpec> pipelines_;
  AuditLog audit_;
  QuotaMeter quotas_;
};

// {has_any_tags: p.task_tags}; throws invalid_request without task tags.
StructuredPredicate task_scope(const Principal& p);

// Sequential: {agents: [previous stage], has_tag: workflow}; throws
// invalid_request for the first stage or a non-member. Parallel: {agents:
// group members, has_tag: workflow} for any member.
StructuredPredicate pipeline_predecessor_scope(const Principal& p,
                                               const PipelineSpec& pipeline);

std::string_view strategy_name(Strategy s);
json to_json(const AccessRule& rule);
AccessRule rule_from_json(const json& j);
json to_json(const PipelineSpec& pipeline);
PipelineSpec pipeline_from_json(const json& j);
json to_json(const AccessDecision& decision);
json to_json(const AuditEntry& entry);
AuditEntry audit_entry_from_json(const json& j);

// Short stable digest (16 hex chars of FNV-1a) of a JSON value.
std::string digest_of(const json& value);

}  // namespace memhub

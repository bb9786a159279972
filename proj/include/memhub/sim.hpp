#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "memhub/access.hpp"
#include "memhub/codec.hpp"

namespace memhub {

// hub: shared memory through the service. isolated: every retrieval is
// forced to {sessions: [current session]}, the per-dialogue baseline.
enum class SimMode { kHub, kIsolated };

std::string_view sim_mode_name(SimMode mode);
SimMode sim_mode_from_name(std::string_view name);

struct SimAgent {
  AgentId id;
  TagSet roles;
  TagSet task_tags;
};

// Steps are kept as JSON objects, checked when the scenario is loaded:
//   {"begin": {"tags": [...]}}        open a session
//   {"say": text, "tags"?, "author_kind"?}
//   {"close": {}}
//   {"ask": {"query"|"recall"|"curate"|"window": body}, "id", "expect"}
//   {"await": "agent:label"}          wait for another agent's label
//   {"label": name}
//   {"advance_ms": n}
struct Scenario {
  std::string name;
  std::string description;
  std::vector<SimAgent> agents;
  std::vector<json> policies;  // rules, or {"pipeline": {...}}
  std::vector<PipelineSpec> pipelines;
  std::map<std::string, std::vector<json>> scripts;
  std::vector<std::string> criteria;           // ask ids deciding the outcome
  std::vector<std::string> isolated_failures;  // criteria expected to fail
};

// Validates everything that can be checked before running; throws
// invalid_request naming the offending part.
Scenario scenario_from_json(const json& j);

struct AssertionOutcome {
  std::string id;
  std::string agent;
  bool passed = false;
  bool criterion = false;
  std::size_t result_count = 0;
  std::string detail;
};

enum class ScenarioOutcome { kPass, kFail, kExpectedFailure };

std::string_view scenario_outcome_name(ScenarioOutcome outcome);

struct ScenarioReport {
  std::string name;
  SimMode mode;
  ScenarioOutcome outcome;
  std::vector<AssertionOutcome> assertions;
  std::vector<std::string> transcript;

  const AssertionOutcome* find(const std::string& id) const;
};

json to_json(const ScenarioReport& report);

// Names of the compiled-in scenarios, sorted.
std::vector<std::string> list_scenarios();
Scenario builtin_scenario(const std::string& name);

// Runs the scenario against a fresh hub served over HTTP on a loopback port,
// with a manual clock starting 2023-10-02T00:00:00Z that advances one second
// per round-robin round.
ScenarioReport run_scenario(const Scenario& scenario, SimMode mode);
ScenarioReport run_scenario(const std::string& name, SimMode mode);

}  // namespace memhub

#include <CLI11.hpp>
#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "memhub/client.hpp"
#include "memhub/hub.hpp"
#include "memhub/server.hpp"
#include "memhub/sim.hpp"
#include "memhub/tokens.hpp"

using namespace memhub;

namespace {

std::string env_or(const char* name, std::string fallback = "") {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    auto j = s.find(',', i);
    if (j == std::string::npos) j = s.size();
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

json parse_arg(const std::string& text, const char* what) {
  try {
    return parse_json(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidRequest,
                std::string(what) + " is not valid JSON: " + e.what());
  }
}

struct Globals {
  std::string data_dir = env_or("MEMHUB_DATA_DIR");
  std::string addr;
  std::string token = env_or("MEMHUB_TOKEN", env_or("MEMHUB_ADMIN_TOKEN"));
  std::string output = "text";
};

// Lazily opens either the local store or a connection to a server.
class Backend {
 public:
  explicit Backend(const Globals& g) : g_(g) {}

  json call(const std::string& method, const std::string& path,
            const json& body = nullptr, const QueryParams& params = {}) {
    if (!g_.addr.empty()) {
      if (!client_) {
        auto [host, port] = parse_address(g_.addr);
        client_ = std::make_unique<HubClient>(host, port, g_.token);
      }
      return client_->call(method, path, body, params);
    }
    if (!hub_) {
      if (g_.data_dir.empty()) {
        throw_invalid("pass --data-dir (local) or --addr (remote)");
      }
      HubConfig config;
      config.store.data_dir = g_.data_dir;
      hub_ = std::make_unique<Hub>(std::move(config));
    }
    return hub_->dispatch(hub_->local_admin(), method, path, params, body);
  }

 private:
  const Globals& g_;
  std::unique_ptr<HubClient> client_;
  std::unique_ptr<Hub> hub_;
};

void print_record_line(const json& r, std::ostream& out) {
  out << "#" << r["seq"].get<Seq>() << " [" << r["agent"].get<std::string>()
      << "] " << r["content"].get<std::string>();
}

int serve(const Globals& g, const std::string& addr_arg) {
  const std::string addr =
      addr_arg.empty() ? env_or("MEMHUB_ADDR", "127.0.0.1:8080") : addr_arg;
  if (g.data_dir.empty()) throw_invalid("serve needs --data-dir or MEMHUB_DATA_DIR");
  auto [host, port] = parse_address(addr);

  HubConfig config;
  config.store.data_dir = g.data_dir;
  const std::string admin = env_or("MEMHUB_ADMIN_TOKEN");
  if (admin.empty()) {
    config.admin_token = random_token();
    std::cerr << "MEMHUB_ADMIN_TOKEN not set; bootstrap admin token: "
              << *config.admin_token << "\n";
  } else {
    config.admin_token = admin;
  }

  // Signals are taken synchronously so the server can shut down cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Hub hub(std::move(config));
  HubServer server(hub);
  server.start(host, port);
  std::cerr << "memhub listening on " << host << ":" << server.port() << "\n";
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memhub: shared working memory for multi-agent systems"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--data-dir", g.data_dir, "Data directory (local mode)");
  app.add_option("--addr", g.addr, "Server host:port (remote mode)");
  app.add_option("--token", g.token, "Bearer token for remote mode");
  app.add_option("--output", g.output, "Output format")
      ->check(CLI::IsMember({"text", "json"}));

  std::function<int()> action;
  Backend backend(g);
  const auto json_out = [&] { return g.output == "json"; };

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_addr;
  serve_cmd->add_option("--addr", serve_addr, "Bind address host:port");
  serve_cmd->add_option("--data-dir", g.data_dir, "Data directory");
  serve_cmd->callback([&] { action = [&] { return serve(g, serve_addr); }; });

  // session begin|close
  auto* session = app.add_subcommand("session", "Open or close sessions");
  session->require_subcommand(1);
  auto* begin = session->add_subcommand("begin", "Open a session");
  std::string begin_agent, begin_tags;
  begin->add_option("--agent", begin_agent, "Session owner")->required();
  begin->add_option("--tags", begin_tags, "Comma-separated task tags");
  begin->callback([&] {
    action = [&] {
      const json out = backend.call(
          "POST", "/v1/sessions",
          json{{"agent", begin_agent}, {"task_tags", split_csv(begin_tags)}});
      std::cout << (json_out() ? out.dump() : std::to_string(out["session"].get<SessionId>()))
                << "\n";
      return 0;
    };
  });
  auto* close = session->add_subcommand("close", "Close a session");
  SessionId close_id = 0;
  close->add_option("id", close_id, "Session id")->required();
  close->callback([&] {
    action = [&] {
      const json out = backend.call(
          "POST", "/v1/sessions/" + std::to_string(close_id) + "/close");
      if (json_out()) {
        std::cout << out.dump() << "\n";
      } else if (out.contains("empty")) {
        std::cout << "session " << close_id << " was empty and is discarded\n";
      } else {
        std::cout << "episode " << close_id << " closed with "
                  << out["records"].size() << " records\n";
      }
      return 0;
    };
  });

  // append
  auto* append = app.add_subcommand("append", "Append a record to a session");
  SessionId append_session = 0;
  std::string append_agent, append_content, append_kind = "agent", append_tags;
  append->add_option("--session", append_session, "Session id")->required();
  append->add_option("--agent", append_agent, "Author")->required();
  append->add_option("--content", append_content, "Record text")->required();
  append->add_option("--kind", append_kind, "user, agent, system or tool");
  append->add_option("--tags", append_tags, "Extra comma-separated tags");
  append->callback([&] {
    action = [&] {
      const json out = backend.call(
          "POST", "/v1/records",
          json{{"session", append_session},
               {"agent", append_agent},
               {"author_kind", append_kind},
               {"content", append_content},
               {"tags", split_csv(append_tags)}});
      std::cout << (json_out() ? out.dump() : std::to_string(out["seq"].get<Seq>()))
                << "\n";
      return 0;
    };
  });

  // query
  auto* query = app.add_subcommand("query", "Run a hybrid query");
  std::string query_json;
  query->add_option("--json", query_json, "HybridQuery JSON")->required();
  query->callback([&] {
    action = [&] {
      const json out =
          backend.call("POST", "/v1/query", parse_arg(query_json, "--json"));
      if (json_out()) {
        std::cout << out.dump() << "\n";
      } else {
        for (const auto& r : out["results"]) {
          std::cout << r["score"].get<double>() << "  ";
          print_record_line(r["record"], std::cout);
          std::cout << "\n";
        }
      }
      return 0;
    };
  });

  // episodes list|show
  auto* episodes = app.add_subcommand("episodes", "Browse episodes");
  episodes->require_subcommand(1);
  auto* ep_list = episodes->add_subcommand("list", "List episodes");
  std::string ep_filter;
  ep_list->add_option("--filter", ep_filter, "Predicate JSON");
  ep_list->callback([&] {
    action = [&] {
      QueryParams params;
      if (!ep_filter.empty()) {
        params.emplace("filter", parse_arg(ep_filter, "--filter").dump());
      }
      const json out = backend.call("GET", "/v1/episodes", nullptr, params);
      if (json_out()) {
        std::cout << out["episodes"].dump() << "\n";
      } else {
        for (const auto& e : out["episodes"]) {
          std::cout << e["id"].get<EpisodeId>() << "  "
                    << e["agent"].get<std::string>() << "  "
                    << (e["open"].get<bool>() ? "open" : "closed") << "  "
                    << e["record_count"].get<std::size_t>() << " records\n";
        }
      }
      return 0;
    };
  });
  auto* ep_show = episodes->add_subcommand("show", "Show one episode");
  EpisodeId show_id = 0;
  ep_show->add_option("id", show_id, "Episode id")->required();
  ep_show->callback([&] {
    action = [&] {
      const json out =
          backend.call("GET", "/v1/episodes/" + std::to_string(show_id));
      if (json_out()) {
        std::cout << out.dump() << "\n";
      } else {
        std::cout << "episode " << show_id << " by "
                  << out["agent"].get<std::string>() << "\n";
        for (const auto& r : out["records"]) {
          print_record_line(r, std::cout);
          std::cout << "\n";
        }
      }
      return 0;
    };
  });

  // window
  auto* window = app.add_subcommand("window", "Build a history window");
  SessionId win_session = 0, win_episode = 0;
  std::string win_form = "rolling", win_focus;
  std::size_t win_budget = 0;
  auto* win_s = window->add_option("--session", win_session, "Session id");
  auto* win_e = window->add_option("--episode", win_episode, "Episode id");
  win_s->excludes(win_e);
  window->add_option("--form", win_form, "rolling, extracts or summary");
  window->add_option("--budget", win_budget, "Token budget")->required();
  window->add_option("--focus", win_focus, "Focus text for extracts");
  window->callback([&] {
    action = [&] {
      if (!win_session && !win_episode) {
        throw_invalid("window needs --session or --episode");
      }
      json body{{"target", win_session ? json{{"session", win_session}}
                                       : json{{"episode", win_episode}}},
                {"form", win_form},
                {"budget", win_budget}};
      if (!win_focus.empty()) body["focus"] = win_focus;
      const json out = backend.call("POST", "/v1/window", body);
      if (json_out()) {
        std::cout << out.dump() << "\n";
      } else {
        for (const auto& it : out["items"]) {
          std::cout << it["text"].get<std::string>() << "\n";
        }
        std::cout << "-- " << out["token_count"].get<std::size_t>()
                  << " tokens" << (out["truncated"].get<bool>() ? ", truncated" : "")
                  << "\n";
      }
      return 0;
    };
  });

  // recall
  auto* recall = app.add_subcommand("recall", "Recall relevant past episodes");
  std::string recall_text, recall_filter;
  std::size_t recall_k = 5;
  recall->add_option("--text", recall_text, "Current context")->required();
  recall->add_option("--k", recall_k, "Episodes to return");
  recall->add_option("--filter", recall_filter, "Episode predicate JSON");
  recall->callback([&] {
    action = [&] {
      json body{{"context", {{"text", recall_text}}}, {"k", recall_k}};
      if (!recall_filter.empty()) {
        body["filter"] = parse_arg(recall_filter, "--filter");
      }
      const json out = backend.call("POST", "/v1/recall", body);
      if (json_out()) {
        std::cout << out.dump() << "\n";
      } else {
        for (const auto& h : out["episodes"]) {
          std::cout << "episode " << h["episode"].get<EpisodeId>() << "  "
                    << h["agent"].get<std::string>() << "  score "
                    << h["score"].get<double>() << "\n";
        }
      }
      return 0;
    };
  });

  // curate
  auto* curate = app.add_subcommand("curate", "Curated memory bundle for planning");
  std::string curate_text, curate_horizon = "short_term";
  std::size_t curate_k = 8;
  curate->add_option("--text", curate_text, "Planning query")->required();
  curate->add_option("--horizon", curate_horizon, "short_term or long_term");
  curate->add_option("--k", curate_k, "Bundle size");
  curate->callback([&] {
    action = [&] {
      const json out = backend.call(
          "POST", "/v1/curate",
          json{{"query", {{"text", curate_text}}},
               {"horizon", curate_horizon},
               {"k", curate_k}});
      if (json_out()) {
        std::cout << out.dump() << "\n";
      } else {
        for (const auto& it : out["items"]) {
          std::cout << it["combined"].get<double>() << "  ";
          print_record_line(it["record"], std::cout);
          std::cout << "\n";
        }
      }
      return 0;
    };
  });

  // policy add|remove|list
  auto* policy = app.add_subcommand("policy", "Manage access rules");
  policy->require_subcommand(1);
  auto* pol_add = policy->add_subcommand("add", "Add a rule or pipeline");
  std::string pol_json;
  pol_add->add_option("--json", pol_json, "Rule JSON or {\"pipeline\": ...}")
      ->required();
  pol_add->callback([&] {
    action = [&] {
      const json out =
          backend.call("POST", "/v1/policies", parse_arg(pol_json, "--json"));
      std::cout << out.dump() << "\n";
      return 0;
    };
  });
  auto* pol_rm = policy->add_subcommand("remove", "Remove a rule or pipeline");
  std::string pol_id;
  pol_rm->add_option("id", pol_id, "Rule id or workflow")->required();
  pol_rm->callback([&] {
    action = [&] {
      const json out = backend.call("DELETE", "/v1/policies/" + pol_id);
      std::cout << (json_out() ? out.dump() : "removed " + pol_id) << "\n";
      return 0;
    };
  });
  auto* pol_list = policy->add_subcommand("list", "List rules and pipelines");
  pol_list->callback([&] {
    action = [&] {
      const json out = backend.call("GET", "/v1/policies");
      if (json_out()) {
        std::cout << out.dump() << "\n";
      } else {
        for (const auto& r : out["rules"]) {
          std::cout << r["id"].get<std::string>() << "  "
                    << r["strategy"].get<std::string>() << "  "
                    << r["effect"].get<std::string>() << "  "
                    << r["subject"].dump() << "\n";
        }
        for (const auto& p : out["pipelines"]) {
          std::cout << p["workflow"].get<std::string>() << "  "
                    << p["mode"].get<std::string>() << "  "
                    << p["stages"].dump() << "\n";
        }
      }
      return 0;
    };
  });

  // audit tail
  auto* audit = app.add_subcommand("audit", "Read the audit log");
  audit->require_subcommand(1);
  auto* tail = audit->add_subcommand("tail", "Most recent entries");
  std::size_t tail_n = 20;
  std::string tail_agent, tail_op, tail_decision;
  tail->add_option("-n", tail_n, "Entries to show");
  tail->add_option("--agent", tail_agent, "Only this agent");
  tail->add_option("--operation", tail_op, "Only this operation");
  tail->add_option("--decision", tail_decision, "Only this decision");
  tail->callback([&] {
    action = [&] {
      QueryParams params{{"tail", std::to_string(tail_n)}};
      if (!tail_agent.empty()) params.emplace("agent", tail_agent);
      if (!tail_op.empty()) params.emplace("operation", tail_op);
      if (!tail_decision.empty()) params.emplace("decision", tail_decision);
      const json out = backend.call("GET", "/v1/audit", nullptr, params);
      if (json_out()) {
        std::cout << out["entries"].dump() << "\n";
      } else {
        for (const auto& e : out["entries"]) {
          std::cout << e["id"].get<std::uint64_t>() << "  "
                    << e["ts"].get<TimestampMs>() << "  "
                    << e["agent"].get<std::string>() << "  "
                    << e["operation"].get<std::string>() << "  "
                    << e["decision"].get<std::string>() << "  "
                    << e["records_returned"].get<std::size_t>() << "\n";
        }
      }
      return 0;
    };
  });

  // token issue|revoke
  auto* token = app.add_subcommand("token", "Manage API tokens");
  token->require_subcommand(1);
  auto* tok_issue = token->add_subcommand("issue", "Issue a token");
  std::string tok_agent, tok_roles, tok_tags;
  bool tok_admin = false;
  tok_issue->add_option("--agent", tok_agent, "Agent id")->required();
  tok_issue->add_option("--roles", tok_roles, "Comma-separated roles");
  tok_issue->add_option("--task-tags", tok_tags, "Comma-separated task tags");
  tok_issue->add_flag("--admin", tok_admin, "Grant admin rights");
  tok_issue->callback([&] {
    action = [&] {
      const json out = backend.call("POST", "/v1/tokens",
                                    json{{"agent", tok_agent},
                                         {"roles", split_csv(tok_roles)},
                                         {"task_tags", split_csv(tok_tags)},
                                         {"admin", tok_admin}});
      if (json_out()) {
        std::cout << out.dump() << "\n";
      } else {
        std::cout << out["id"].get<std::string>() << " "
                  << out["token"].get<std::string>() << "\n";
      }
      return 0;
    };
  });
  auto* tok_revoke = token->add_subcommand("revoke", "Revoke a token");
  std::string tok_id;
  tok_revoke->add_option("id", tok_id, "Token id")->required();
  tok_revoke->callback([&] {
    action = [&] {
      const json out = backend.call("DELETE", "/v1/tokens/" + tok_id);
      std::cout << (json_out() ? out.dump() : "revoked " + tok_id) << "\n";
      return 0;
    };
  });

  // scenario run|list
  auto* scenario = app.add_subcommand("scenario", "Built-in agent simulations");
  scenario->require_subcommand(1);
  auto* sc_run = scenario->add_subcommand("run", "Run a scenario");
  std::string sc_name, sc_mode = "hub", sc_file;
  sc_run->add_option("name", sc_name, "Scenario name");
  sc_run->add_option("--file", sc_file, "Scenario JSON file instead of a name");
  sc_run->add_option("--mode", sc_mode, "hub or isolated")
      ->check(CLI::IsMember({"hub", "isolated"}));
  sc_run->callback([&] {
    action = [&] {
      const SimMode mode = sim_mode_from_name(sc_mode);
      ScenarioReport report;
      if (!sc_file.empty()) {
        std::ifstream in(sc_file);
        if (!in) throw_invalid("cannot read " + sc_file);
        std::stringstream buf;
        buf << in.rdbuf();
        report = run_scenario(scenario_from_json(parse_json(buf.str())), mode);
      } else if (!sc_name.empty()) {
        report = run_scenario(sc_name, mode);
      } else {
        throw_invalid("scenario run needs a name or --file");
      }
      if (json_out()) {
        std::cout << to_json(report).dump() << "\n";
      } else {
        std::cout << report.name << " [" << sim_mode_name(report.mode) << "]\n";
        for (const auto& a : report.assertions) {
          std::cout << "  " << (a.passed ? "ok  " : "FAIL") << " " << a.id
                    << " (" << a.agent << ", " << a.result_count
                    << " results): " << a.detail << "\n";
        }
        std::cout << scenario_outcome_name(report.outcome) << "\n";
      }
      return report.outcome == ScenarioOutcome::kFail ? 2 : 0;
    };
  });
  auto* sc_list = scenario->add_subcommand("list", "List built-in scenarios");
  sc_list->callback([&] {
    action = [&] {
      const auto names = list_scenarios();
      if (json_out()) {
        std::cout << json(names).dump() << "\n";
      } else {
        for (const auto& n : names) std::cout << n << "\n";
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    return action ? action() : 1;
  } catch (const Error& e) {
    std::cerr << "error (" << error_code_name(e.code()) << "): " << e.what()
              << "\n";
    return e.code() == ErrorCode::kInvalidRequest ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

// Command-line front end: replay a log, serve live sessions, validate a bundle.

#include <pthread.h>
#include <signal.h>

#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "goalcast/bundle.hpp"
#include "goalcast/error.hpp"
#include "goalcast/replay.hpp"
#include "goalcast/service.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

std::shared_ptr<const goalcast::ModelBundle> load(const std::string& dir) {
  return std::make_shared<const goalcast::ModelBundle>(goalcast::load_bundle(dir));
}

struct ReplayArgs {
  std::string bundle;
  std::string log;
  std::string policy;
  std::string out;
  std::optional<double> threshold;
  std::vector<std::string> queries;
  std::optional<goalcast::Millis> until;
  std::string profile;
};

int run_replay(const ReplayArgs& a) {
  auto bundle = load(a.bundle);
  goalcast::ReplayOptions opts;
  if (!a.policy.empty()) opts.policy = goalcast::parse_policy(a.policy);
  opts.threshold = a.threshold;
  for (const auto& q : a.queries) opts.queries.push_back(goalcast::parse_query_at(q));
  opts.until = a.until;
  if (!a.profile.empty()) opts.profile = goalcast::load(a.profile, &bundle->rules);
  const auto events = goalcast::read_event_log(a.log);
  const auto results = goalcast::replay(bundle, events, opts);
  const std::string trace = goalcast::render_trace(results);

  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) throw goalcast::IoError("cannot write " + a.out);
  out << trace;
  out.close();
  if (!out) throw goalcast::IoError("failed writing " + a.out);
  fmt::print("{} cycles, sha256 {}\n", results.size(), goalcast::sha256_hex(trace));
  return kOk;
}

int run_serve(const std::string& dir, const std::string& host, int port) {
  auto bundle = load(dir);

  // Signals are taken synchronously by a watcher thread so stop() never runs
  // inside a handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  goalcast::Service service(bundle);
  const int bound = service.bind(host, port);
  fmt::print("listening on {}:{}\n", host, bound);
  std::fflush(stdout);

  std::thread watcher([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.run();
  // run() can also return on its own; wake the watcher so it can be joined.
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  return kOk;
}

int run_validate(const std::string& dir) {
  const auto bundle = goalcast::load_bundle(dir);
  fmt::print("ok: {} variables, {} filters, {} goals, {} terms\n", bundle.model.network.variables().size(),
             bundle.program.filters().size(), bundle.terms.goals.size(), bundle.terms.likelihood.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"goalcast: goal inference over interface event streams"};
  app.require_subcommand(1);

  ReplayArgs r;
  auto* replay = app.add_subcommand("replay", "Replay an event log in virtual time and write a trace");
  replay->add_option("--bundle", r.bundle, "Model bundle directory")->required();
  replay->add_option("--log", r.log, "Event log")->required();
  replay->add_option("--policy", r.policy, "Control policy, e.g. pulsed:1s");
  replay->add_option("--out", r.out, "Trace output file")->required();
  replay->add_option("--threshold", r.threshold, "Assistance threshold in [0,1]");
  replay->add_option("--query-at", r.queries, "Query as T:TEXT with T in ms (repeatable)");
  replay->add_option("--until", r.until, "Virtual end time in ms");
  replay->add_option("--profile", r.profile, "Competency profile JSON");

  std::string serve_bundle;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the live session service");
  serve->add_option("--bundle", serve_bundle, "Model bundle directory")->required();
  serve->add_option("--port", port, "TCP port, 0 for any free port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Listen address");

  std::string validate_bundle;
  auto* validate = app.add_subcommand("validate", "Load and cross-check a bundle");
  validate->add_option("--bundle", validate_bundle, "Model bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    if (*replay) return run_replay(r);
    if (*serve) return run_serve(serve_bundle, host, port);
    return run_validate(validate_bundle);
  } catch (const goalcast::BundleError& e) {
    std::cerr << e.what() << '\n';
    return kValidation;
  } catch (const goalcast::LogParseError& e) {
    std::cerr << r.log << ": " << e.what() << '\n';
    return kValidation;
  } catch (const goalcast::UnknownSymbol& e) {
    std::cerr << "UnknownSymbol: " << e.what() << '\n';
    return kValidation;
  } catch (const goalcast::SchemaVersionError& e) {
    std::cerr << "SchemaVersionError: " << e.what() << '\n';
    return kValidation;
  } catch (const goalcast::CorruptProfile& e) {
    std::cerr << "CorruptProfile: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

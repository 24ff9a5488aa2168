#include "goalcast/service.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "goalcast/error.hpp"
#include "goalcast/session.hpp"

namespace goalcast {

using nlohmann::json;

namespace {

struct Entry {
  explicit Entry(Session s) : session(std::move(s)) {}

  std::mutex mutex;
  std::condition_variable changed;
  Session session;
  std::vector<std::string> results;  // serialized CycleResults in order
  bool closed = false;
};

/// Maps failures to status codes and a {"error","message"} body.
struct HttpError {
  int status;
  std::string kind;
  std::string message;
};

json parse_body(const httplib::Request& req, bool required) {
  if (req.body.empty()) {
    if (required) throw HttpError{400, "BadRequest", "request body required"};
    return json::object();
  }
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "BadRequest", "body must be a JSON object"};
    return j;
  } catch (const json::exception& e) {
    throw HttpError{400, "BadRequest", std::string("invalid JSON: ") + e.what()};
  }
}

std::string cycles_body(const std::vector<std::string>& lines) {
  std::string out = R"({"cycles":[)";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += ',';
    out += lines[i];
  }
  out += "]}";
  return out;
}

AtomicEvent event_from_json(const json& j) {
  AtomicEvent e;
  e.symbol = j.at("symbol").get<std::string>();
  e.timestamp = j.at("t").get<Millis>();
  if (j.contains("attributes")) {
    for (const auto& [k, v] : j.at("attributes").items()) e.attributes[k] = v.get<std::string>();
  }
  return e;
}

}  // namespace

struct Service::Impl {
  explicit Impl(std::shared_ptr<const ModelBundle> b) : bundle(std::move(b)) { routes(); }

  std::shared_ptr<const ModelBundle> bundle;
  httplib::Server server;
  std::mutex registry_mutex;
  std::map<std::string, std::shared_ptr<Entry>> sessions;
  std::uint64_t next_id = 1;
  std::atomic<bool> stopping{false};

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(registry_mutex);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw UnknownSession("no session '" + id + "'");
    return it->second;
  }

  // Records new results under the entry lock and wakes stream readers.
  static std::vector<std::string> publish(Entry& entry, const std::vector<CycleResult>& results) {
    std::vector<std::string> lines;
    for (const auto& r : results) {
      lines.push_back(to_json_line(r));
      entry.results.push_back(lines.back());
    }
    if (!results.empty()) entry.changed.notify_all();
    return lines;
  }

  template <typename Fn>
  httplib::Server::Handler wrap(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      auto fail = [&](int status, const std::string& kind, const std::string& message) {
        res.status = status;
        res.set_content(json{{"error", kind}, {"message", message}}.dump(), "application/json");
      };
      try {
        fn(req, res);
      } catch (const HttpError& e) {
        fail(e.status, e.kind, e.message);
      } catch (const UnknownSession& e) {
        fail(404, "UnknownSession", e.what());
      } catch (const UnknownSymbol& e) {
        fail(400, "UnknownSymbol", e.what());
      } catch (const OutOfOrderTimestamp& e) {
        fail(400, "OutOfOrderTimestamp", e.what());
      } catch (const SchemaVersionError& e) {
        fail(400, "SchemaVersionError", e.what());
      } catch (const CorruptProfile& e) {
        fail(400, "CorruptProfile", e.what());
      } catch (const json::exception& e) {
        fail(400, "BadRequest", e.what());
      } catch (const std::invalid_argument& e) {
        fail(400, "BadRequest", e.what());
      } catch (const std::exception& e) {
        fail(500, "InternalError", e.what());
      }
    };
  }

  void routes() {
    server.Get("/health", wrap([this](const httplib::Request&, httplib::Response& res) {
      std::size_t n = 0;
      {
        std::lock_guard lock(registry_mutex);
        n = sessions.size();
      }
      res.set_content(json{{"status", "ok"}, {"sessions", n}}.dump(), "application/json");
    }));

    server.Post("/sessions", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req, false);
      SessionOptions opts;
      if (body.contains("profile")) opts.profile = profile_from_json(body.at("profile").dump());
      if (body.contains("user_id")) opts.profile.user_id = body.at("user_id").get<std::string>();
      if (body.contains("declared_level")) opts.profile.declared_level = body.at("declared_level").get<std::string>();
      if (body.contains("policy")) opts.policy = parse_policy(body.at("policy").get<std::string>());
      if (body.contains("threshold")) opts.threshold = body.at("threshold").get<double>();
      auto entry = std::make_shared<Entry>(Session(bundle, std::move(opts)));
      std::string id;
      {
        std::lock_guard lock(registry_mutex);
        id = "s" + std::to_string(next_id++);
        sessions.emplace(id, entry);
      }
      res.status = 201;
      res.set_content(json{{"session", id},
                           {"policy", to_string(entry->session.policy())},
                           {"threshold", entry->session.threshold()}}
                          .dump(),
                      "application/json");
    }));

    server.Delete(R"(/sessions/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      std::shared_ptr<Entry> entry;
      {
        std::lock_guard lock(registry_mutex);
        const auto it = sessions.find(id);
        if (it == sessions.end()) throw UnknownSession("no session '" + id + "'");
        entry = it->second;
        sessions.erase(it);
      }
      std::lock_guard lock(entry->mutex);
      entry->closed = true;
      entry->changed.notify_all();
      res.set_content(R"({"closed":)" + json(id).dump() + R"(,"profile":)" +
                          json::parse(to_json(entry->session.profile())).dump() + "}",
                      "application/json");
    }));

    server.Post(R"(/sessions/([^/]+)/events)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      const json body = parse_body(req, true);
      std::vector<AtomicEvent> events;
      if (body.contains("events")) {
        for (const auto& e : body.at("events")) events.push_back(event_from_json(e));
      } else {
        events.push_back(event_from_json(body));
      }
      std::lock_guard lock(entry->mutex);
      std::vector<std::string> lines;
      for (auto& e : events) {
        auto more = publish(*entry, entry->session.submit_event(std::move(e)));
        lines.insert(lines.end(), more.begin(), more.end());
      }
      res.set_content(cycles_body(lines), "application/json");
    }));

    server.Post(R"(/sessions/([^/]+)/advance)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      const json body = parse_body(req, true);
      const Millis t = body.at("t").get<Millis>();
      std::lock_guard lock(entry->mutex);
      res.set_content(cycles_body(publish(*entry, entry->session.advance_to(t))), "application/json");
    }));

    server.Post(R"(/sessions/([^/]+)/query)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      const json body = parse_body(req, true);
      const std::string text = body.at("text").get<std::string>();
      std::lock_guard lock(entry->mutex);
      std::vector<CycleResult> results;
      if (body.contains("t")) results = entry->session.advance_to(body.at("t").get<Millis>());
      results.push_back(entry->session.query(text));
      res.set_content(cycles_body(publish(*entry, results)), "application/json");
    }));

    server.Post(R"(/sessions/([^/]+)/threshold)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      const json body = parse_body(req, true);
      std::lock_guard lock(entry->mutex);
      entry->session.set_threshold(body.at("value").get<double>());
      res.set_content(json{{"threshold", entry->session.threshold()}}.dump(), "application/json");
    }));

    server.Post(R"(/sessions/([^/]+)/offer)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      const json body = parse_body(req, true);
      const std::string outcome = body.at("outcome").get<std::string>();
      std::optional<std::string> topic;
      if (body.contains("topic")) topic = body.at("topic").get<std::string>();
      OfferOutcome o;
      if (outcome == "acknowledged") {
        o = OfferOutcome::Acknowledged;
      } else if (outcome == "dismissed") {
        o = OfferOutcome::Dismissed;
      } else {
        throw HttpError{400, "BadRequest", "outcome must be 'acknowledged' or 'dismissed'"};
      }
      std::lock_guard lock(entry->mutex);
      const bool resolved = entry->session.resolve_offer(o, topic);
      res.set_content(json{{"resolved", resolved}}.dump(), "application/json");
    }));

    server.Get(R"(/sessions/([^/]+)/results)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      const std::size_t from = req.has_param("from") ? std::stoul(req.get_param_value("from")) : 0;
      std::lock_guard lock(entry->mutex);
      std::string out = R"({"results":[)";
      for (std::size_t i = from; i < entry->results.size(); ++i) {
        if (i > from) out += ',';
        out += entry->results[i];
      }
      out += R"(],"next":)" + std::to_string(entry->results.size()) + "}";
      res.set_content(out, "application/json");
    }));

    server.Get(R"(/sessions/([^/]+)/summary)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      const std::size_t n = req.has_param("n") ? std::stoul(req.get_param_value("n")) : 10;
      std::lock_guard lock(entry->mutex);
      json items = json::array();
      for (const auto& [topic, count] : entry->session.summary(n)) items.push_back({{"topic", topic}, {"count", count}});
      res.set_content(json{{"summary", items}}.dump(), "application/json");
    }));

    server.Get(R"(/sessions/([^/]+)/stream)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      auto next = std::make_shared<std::size_t>(req.has_param("from") ? std::stoul(req.get_param_value("from")) : 0);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, entry, next](std::size_t, httplib::DataSink& sink) {
        std::unique_lock lock(entry->mutex);
        entry->changed.wait_for(lock, std::chrono::milliseconds(250),
                                [&] { return entry->closed || *next < entry->results.size() || stopping.load(); });
        std::string chunk;
        for (; *next < entry->results.size(); ++*next) {
          chunk += "id: " + std::to_string(*next) + "\ndata: " + entry->results[*next] + "\n\n";
        }
        const bool done = entry->closed || stopping.load();
        lock.unlock();
        if (chunk.empty() && !done) chunk = ":\n\n";
        if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
        if (done) {
          sink.done();
          return true;
        }
        return true;
      });
    }));
  }
};

Service::Service(std::shared_ptr<const ModelBundle> bundle) : impl_(std::make_unique<Impl>(std::move(bundle))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  impl_->stopping = true;
  {
    std::lock_guard lock(impl_->registry_mutex);
    for (auto& [id, entry] : impl_->sessions) {
      std::lock_guard l(entry->mutex);
      entry->changed.notify_all();
    }
  }
  impl_->server.stop();
}

}  // namespace goalcast

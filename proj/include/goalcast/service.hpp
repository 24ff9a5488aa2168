#pragma once

#include <memory>
#include <string>

#include "goalcast/bundle.hpp"

namespace goalcast {

/// HTTP front end for live sessions. Routes and message shapes are listed in
/// docs/service-protocol.md. Each session is serialized behind its own lock;
/// distinct sessions proceed in parallel.
class Service {
 public:
  explicit Service(std::shared_ptr<const ModelBundle> bundle);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the port.
  /// Throws IoError when binding fails.
  int bind(const std::string& host, int port);

  /// Serves requests until stop() is called. Requires a successful bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace goalcast

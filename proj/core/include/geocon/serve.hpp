#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "geocon/store.hpp"

namespace geocon {

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

using QueryParams = std::map<std::string, std::string>;

/// Pure request router over an immutable store (GET semantics).
ApiResponse handle_request(const ResultStore& store, std::string_view path, const QueryParams& query);

/// HTTP front end; the store must outlive the server.
class ApiServer {
 public:
  explicit ApiServer(const ResultStore& store);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds without serving; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace geocon

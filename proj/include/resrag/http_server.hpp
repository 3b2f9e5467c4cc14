#pragma once

#include "qa_service.hpp"

#include <chrono>
#include <memory>
#include <string>

namespace resrag {

/// Maps a library error to an HTTP status and a JSON body
/// `{"error": <kind>, "message": ..., "key"?: ...}`.
std::pair<int, std::string> error_response(std::exception const &e);

struct ServerOptions
{
  std::chrono::seconds request_timeout{130}; // generation timeout + 10 s
  std::size_t max_upload_bytes = 64u << 20;
  std::size_t threads = 8;
};

/// JSON API in front of a QaService.
class HttpServer
{
public:
  HttpServer(QaService &service, ServerOptions options = {});
  ~HttpServer();

  /// Binds and blocks until stop(). Returns false when binding fails.
  bool listen(std::string const &host, int port);
  /// Binds to a free port and returns it; serve with run().
  int bind_any_port(std::string const &host);
  bool run();
  void stop();
  bool running() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace resrag

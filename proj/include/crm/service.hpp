#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "crm/monitor.hpp"

namespace crm::host {

// Newline-delimited JSON over TCP. Records:
//   {"open": {"funit": F, "uid": U}}      -> {"ok": true, "token": T}
//   {"query": {"token": T, "sql": S}}     -> {"ok": true, "columns": [...], "rows": [[...]]}
//                                            or {"ok": true, "count": N}
//                                            or {"ok": false, "error": CODE, "message": M}
//   {"close": {"token": T}}               -> {"ok": true}
// A malformed record answers {"ok": false, "error": "E_PROTOCOL", ...} and
// closes the connection. One logical session per token.
class Server {
 public:
  explicit Server(engine::Monitor& monitor) : monitor_(monitor) {}
  ~Server();

  // Binds host:port (port 0 picks an ephemeral port) and starts accepting.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  bool running() const { return running_.load(); }

 private:
  void accept_loop();
  void handle_connection(int fd);
  std::string handle_record(const std::string& line, bool& close_connection);

  engine::Monitor& monitor_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;

  std::mutex state_mutex_;
  std::map<std::string, engine::Session> sessions_;
  std::vector<int> connection_fds_;
  std::vector<std::thread> connection_threads_;
};

}  // namespace crm::host

#include "crm/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include <nlohmann/json.hpp>

#include "crm/digest.hpp"

namespace crm::host {

namespace {

nlohmann::json value_json(const Value& v) {
  if (v.is_null()) return nullptr;
  if (v.is_int()) return v.as_int();
  return v.as_text();
}

void send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return;
    sent += static_cast<std::size_t>(n);
  }
}

}  // namespace

Server::~Server() { stop(); }

int Server::start(const std::string& host, int port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("invalid listen address " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("bind failed on " + host + ":" + std::to_string(port));
  }
  if (::listen(listen_fd_, 16) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  return port_;
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  {
    std::lock_guard<std::mutex> lock(state_mutex_);
    for (int fd : connection_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard<std::mutex> lock(state_mutex_);
    threads.swap(connection_threads_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

void Server::accept_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    std::lock_guard<std::mutex> lock(state_mutex_);
    connection_fds_.push_back(fd);
    connection_threads_.emplace_back([this, fd] { handle_connection(fd); });
  }
}

void Server::handle_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  bool open = true;
  while (open && running_) {
    ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while (open && (pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (line.empty()) continue;
      bool close_connection = false;
      std::string reply = handle_record(line, close_connection);
      send_all(fd, reply + "\n");
      if (close_connection) open = false;
    }
  }
  ::close(fd);
}

std::string Server::handle_record(const std::string& line, bool& close_connection) {
  nlohmann::json reply;
  try {
    nlohmann::json record = nlohmann::json::parse(line);
    if (record.contains("open")) {
      const auto& open = record.at("open");
      engine::Session session = monitor_.open_session(open.at("funit").get<std::string>(),
                                                      open.at("uid").get<std::string>());
      std::string token = digest::random_hex(16);
      {
        std::lock_guard<std::mutex> lock(state_mutex_);
        sessions_.emplace(token, std::move(session));
      }
      reply["ok"] = true;
      reply["token"] = token;
      return reply.dump();
    }
    if (record.contains("query")) {
      const auto& query = record.at("query");
      std::string token = query.at("token").get<std::string>();
      engine::Session session;
      {
        std::lock_guard<std::mutex> lock(state_mutex_);
        auto it = sessions_.find(token);
        if (it == sessions_.end()) {
          reply["ok"] = false;
          reply["error"] = to_string(ErrorCode::Identity);
          reply["message"] = "unknown session token";
          return reply.dump();
        }
        session = it->second;
      }
      engine::ExecResult result = monitor_.execute(session, query.at("sql").get<std::string>());
      reply["ok"] = true;
      if (result.is_rows) {
        reply["columns"] = result.columns;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : result.rows) {
          nlohmann::json r = nlohmann::json::array();
          for (const auto& v : row) r.push_back(value_json(v));
          rows.push_back(std::move(r));
        }
        reply["rows"] = std::move(rows);
      } else {
        reply["count"] = result.affected;
      }
      return reply.dump();
    }
    if (record.contains("close")) {
      std::string token = record.at("close").at("token").get<std::string>();
      std::lock_guard<std::mutex> lock(state_mutex_);
      sessions_.erase(token);
      reply["ok"] = true;
      return reply.dump();
    }
    reply["ok"] = false;
    reply["error"] = "E_PROTOCOL";
    reply["message"] = "record must contain open, query, or close";
    close_connection = true;
    return reply.dump();
  } catch (const MonitorError& e) {
    reply["ok"] = false;
    reply["error"] = to_string(e.code());
    reply["message"] = e.what();
    return reply.dump();
  } catch (const std::exception& e) {
    reply["ok"] = false;
    reply["error"] = "E_PROTOCOL";
    reply["message"] = e.what();
    close_connection = true;
    return reply.dump();
  }
}

}  // namespace crm::host

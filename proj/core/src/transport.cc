//
// Copyright 2026 The PFDM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//


#include "pfdm/transport.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <openssl/evp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "pfdm/errors.h"

namespace pfdm {

std::string ToString(MessageKind kind) {
  switch (kind) {
    case MessageKind::kNoisyDataset:
      return "noisy-dataset";
    case MessageKind::kRawData:
      return "raw-data";
    case MessageKind::kLocalParameters:
      return "local-parameters";
  }
  return "unknown";
}

std::string Sha256Hex(const Bytes& bytes) {
  unsigned char digest[32];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned i = 0; i < len; ++i) os << std::setw(2) << int{digest[i]};
  return os.str();
}

void AuditLog::Record(AuditEntry entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(entry));
}

std::vector<AuditEntry> AuditLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------

void InProcessTransport::Deliver(const Bytes& message) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(message);
  }
  cv_.notify_all();
}

std::vector<Bytes> InProcessTransport::Collect(std::size_t expected) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout_,
                    [&] { return queue_.size() >= expected; })) {
    throw ProtocolViolation("in-process transport: expected " +
                            std::to_string(expected) + " messages, got " +
                            std::to_string(queue_.size()));
  }
  std::vector<Bytes> out;
  for (std::size_t i = 0; i < expected; ++i) {
    out.push_back(std::move(queue_.front()));
    queue_.pop_front();
  }
  return out;
}

// ---------------------------------------------------------------------------

FileTransport::FileTransport(std::filesystem::path directory,
                             std::chrono::milliseconds timeout)
    : directory_(std::move(directory)), timeout_(timeout) {
  std::filesystem::create_directories(directory_);
}

void FileTransport::Deliver(const Bytes& message) {
  const std::string name = "msg-" + Sha256Hex(message).substr(0, 16) + "-" +
                           std::to_string(sequence_++);
  const auto tmp = directory_ / (name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(message.data()),
              static_cast<std::streamsize>(message.size()));
    if (!out) throw std::runtime_error("file transport: write failed");
  }
  std::filesystem::rename(tmp, directory_ / (name + ".pfdm"));
}

std::vector<Bytes> FileTransport::Collect(std::size_t expected) {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  std::vector<std::filesystem::path> files;
  for (;;) {
    files.clear();
    for (const auto& entry : std::filesystem::directory_iterator(directory_)) {
      if (entry.path().extension() == ".pfdm") files.push_back(entry.path());
    }
    if (files.size() >= expected) break;
    if (std::chrono::steady_clock::now() > deadline) {
      throw ProtocolViolation("file transport: expected " +
                              std::to_string(expected) + " messages in " +
                              directory_.string() + ", found " +
                              std::to_string(files.size()));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  std::sort(files.begin(), files.end());
  files.resize(expected);
  std::vector<Bytes> out;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    out.emplace_back(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
    std::filesystem::rename(path, path.string() + ".done");
  }
  return out;
}

// ---------------------------------------------------------------------------

SocketTransport::SocketTransport(std::uint16_t port,
                                 std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listen_fd_, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw std::runtime_error("socket transport: bind/listen failed: " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { AcceptLoop(); });
}

SocketTransport::~SocketTransport() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void SocketTransport::AcceptLoop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 50);
    if (ready <= 0) continue;
    const int conn = ::accept(listen_fd_, nullptr, nullptr);
    if (conn < 0) continue;
    try {
      while (auto frame = ReadFrameFd(conn)) {
        {
          std::lock_guard lock(mu_);
          queue_.push_back(std::move(*frame));
        }
        cv_.notify_all();
      }
    } catch (const std::exception&) {
      // A broken sender only loses its own frame; Collect times out if the
      // cohort ends up incomplete.
    }
    ::close(conn);
  }
}

void SocketTransport::SendTo(const std::string& host, std::uint16_t port,
                             const Bytes& message) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw InvalidArgument("socket transport: bad IPv4 address '" + host + "'");
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw std::runtime_error("socket transport: connect failed: " + err);
  }
  try {
    WriteFrameFd(fd, message);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

void SocketTransport::Deliver(const Bytes& message) {
  SendTo("127.0.0.1", port_, message);
}

std::vector<Bytes> SocketTransport::Collect(std::size_t expected) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout_,
                    [&] { return queue_.size() >= expected; })) {
    throw ProtocolViolation("socket transport: expected " +
                            std::to_string(expected) + " messages, got " +
                            std::to_string(queue_.size()));
  }
  std::vector<Bytes> out;
  for (std::size_t i = 0; i < expected; ++i) {
    out.push_back(std::move(queue_.front()));
    queue_.pop_front();
  }
  return out;
}

// ---------------------------------------------------------------------------

void ClientChannel::Send(const NoisyDatasetMessage& message) {
  if (message.client_id != client_id_) {
    throw ProtocolViolation("client " + std::to_string(client_id_) +
                            " tried to send a message for client " +
                            std::to_string(message.client_id));
  }
  Send(MessageKind::kNoisyDataset, message.Encode());
}

void ClientChannel::Send(MessageKind kind, const Bytes& bytes) {
  if (kind != MessageKind::kNoisyDataset) {
    throw ProtocolViolation("client " + std::to_string(client_id_) +
                            ": message kind '" + ToString(kind) +
                            "' may not leave the client");
  }
  // Must parse as a noisy-dataset message from this client; throws otherwise.
  NoisyDatasetMessage parsed;
  try {
    parsed = NoisyDatasetMessage::Decode(bytes);
  } catch (const FormatError& e) {
    throw ProtocolViolation(std::string("client outbound payload rejected: ") +
                            e.what());
  }
  if (parsed.client_id != client_id_) {
    throw ProtocolViolation("client outbound payload carries a foreign id");
  }
  transport_.Deliver(bytes);
  audit_.Record({client_id_, kind, bytes.size(), Sha256Hex(bytes)});
}

}  // namespace pfdm

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


#ifndef PFDM_TRANSPORT_H_
#define PFDM_TRANSPORT_H_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pfdm/wire.h"

namespace pfdm {

using Bytes = std::vector<std::uint8_t>;

// Tag attached to anything a client attempts to send. Only kNoisyDataset is
// allowed across the client boundary.
enum class MessageKind : std::uint8_t {
  kNoisyDataset = 1,
  kRawData = 2,
  kLocalParameters = 3,
};
std::string ToString(MessageKind kind);

struct AuditEntry {
  std::uint32_t client_id = 0;
  MessageKind kind = MessageKind::kNoisyDataset;
  std::size_t bytes = 0;
  std::string sha256;  // hex digest of the delivered bytes
};

// Append-only, thread-safe record of every message that crossed a client
// boundary.
class AuditLog {
 public:
  void Record(AuditEntry entry);
  std::vector<AuditEntry> entries() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
};

// Moves opaque message bytes from clients to the server.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void Deliver(const Bytes& message) = 0;
  // Blocks until `expected` messages are available (or the timeout expires,
  // which throws ProtocolViolation) and returns them in arrival order.
  virtual std::vector<Bytes> Collect(std::size_t expected) = 0;
  virtual std::string name() const = 0;
};

// Mutex-guarded queue for single-process simulation.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(
      std::chrono::milliseconds timeout = std::chrono::seconds(600))
      : timeout_(timeout) {}
  void Deliver(const Bytes& message) override;
  std::vector<Bytes> Collect(std::size_t expected) override;
  std::string name() const override { return "in-process"; }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> queue_;
  std::chrono::milliseconds timeout_;
};

// One message per file in a shared directory. Files are written to a
// temporary name and renamed so readers never observe partial messages.
class FileTransport final : public Transport {
 public:
  explicit FileTransport(
      std::filesystem::path directory,
      std::chrono::milliseconds timeout = std::chrono::seconds(600));
  void Deliver(const Bytes& message) override;
  std::vector<Bytes> Collect(std::size_t expected) override;
  std::string name() const override { return "file"; }

  const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path directory_;
  std::chrono::milliseconds timeout_;
  std::atomic<std::uint64_t> sequence_{0};
};

// Loopback stream socket. The server side listens on construction and a
// background thread reads u64-length-prefixed frames from every accepted
// connection; Deliver opens a connection per message.
class SocketTransport final : public Transport {
 public:
  // port 0 picks an ephemeral port.
  explicit SocketTransport(
      std::uint16_t port = 0,
      std::chrono::milliseconds timeout = std::chrono::seconds(600));
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  void Deliver(const Bytes& message) override;
  std::vector<Bytes> Collect(std::size_t expected) override;
  std::string name() const override { return "socket"; }

  std::uint16_t port() const { return port_; }

  // Client-side helper usable from another process.
  static void SendTo(const std::string& host, std::uint16_t port,
                     const Bytes& message);

 private:
  void AcceptLoop();

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::chrono::milliseconds timeout_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> queue_;
};

// The client's only way out. Anything that is not a well-formed
// NoisyDatasetMessage from this client is refused before reaching the
// transport; accepted messages are audited.
class ClientChannel {
 public:
  ClientChannel(std::uint32_t client_id, Transport& transport, AuditLog& audit)
      : client_id_(client_id), transport_(transport), audit_(audit) {}

  void Send(const NoisyDatasetMessage& message);
  // Throws ProtocolViolation for every kind other than kNoisyDataset.
  void Send(MessageKind kind, const Bytes& bytes);

 private:
  std::uint32_t client_id_;
  Transport& transport_;
  AuditLog& audit_;
};

std::string Sha256Hex(const Bytes& bytes);

}  // namespace pfdm

#endif  // PFDM_TRANSPORT_H_

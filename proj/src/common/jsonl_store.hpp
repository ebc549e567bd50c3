#pragma once
// Append-only JSONL persistence for the services: one JSON object per line,
// fsynced before the mutation is acknowledged, replayed in order at startup.
// A torn final line (crash mid-write) is skipped on replay.

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <stdexcept>
#include <string>

namespace elpasso::svc {

class JsonlLog {
 public:
  JsonlLog() = default;
  explicit JsonlLog(const std::string& path) { open(path); }
  ~JsonlLog() {
    if (fd_ >= 0) ::close(fd_);
  }
  JsonlLog(const JsonlLog&) = delete;
  JsonlLog& operator=(const JsonlLog&) = delete;

  void open(const std::string& path) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    fd_ = ::open(path.c_str(), O_CREAT | O_WRONLY | O_APPEND, 0600);
    if (fd_ < 0) throw std::runtime_error("cannot open log file " + path);
    path_ = path;
  }

  void append(const nlohmann::json& j) {
    std::string line = j.dump();
    line.push_back('\n');
    size_t off = 0;
    while (off < line.size()) {
      ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
      if (n < 0) throw std::runtime_error("write failed on " + path_);
      off += size_t(n);
    }
    if (::fdatasync(fd_) != 0) throw std::runtime_error("fdatasync failed on " + path_);
  }

  // feed every complete line to fn before any append happens
  static void replay(const std::string& path, const std::function<void(const nlohmann::json&)>& fn) {
    std::ifstream in(path);
    if (!in) return;  // nothing persisted yet
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        if (in.eof()) break;  // torn tail from a crash; everything before it counted
        throw std::runtime_error("corrupt line in " + path);
      }
      fn(j);
    }
  }

 private:
  int fd_ = -1;
  std::string path_;
};

}  // namespace elpasso::svc

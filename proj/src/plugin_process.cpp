#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "glasslabel/errors.hpp"
#include "glasslabel/ports.hpp"

namespace glasslabel {

PluginProcess::PluginProcess(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  // A dying child must surface as EPIPE, not kill the host.
  std::signal(SIGPIPE, SIG_IGN);
}

PluginProcess::~PluginProcess() { stop(); }

void PluginProcess::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw StageError("pipe() failed: " + std::string(std::strerror(errno)));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw StageError("pipe() failed: " + std::string(std::strerror(errno)));
  }
  const pid_t pid = fork();
  if (pid < 0) throw StageError("fork() failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    // own process group so a timeout can kill whatever sh spawned
    setpgid(0, 0);
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(in_pipe[0]);
  close(out_pipe[1]);
  fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
}

void PluginProcess::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // Closing stdin lets a well-behaved plugin exit; give it a moment.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, nullptr, WNOHANG) == pid_) {
        kill(-pid_, SIGKILL);  // stragglers left by the shell
        pid_ = -1;
        return;
      }
      usleep(2000);
    }
    kill(-pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
}

std::string PluginProcess::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) throw PluginTimeout("plugin '" + command_ + "' timed out");
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw StageError("poll() failed: " + std::string(std::strerror(errno)));
    }
    if (ready == 0) throw PluginTimeout("plugin '" + command_ + "' timed out");
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StageError("read from plugin failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0) throw StageError("plugin '" + command_ + "' closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

PortResponse PluginProcess::call(const PortRequest& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (pid_ < 0) start();
  try {
    const std::string line = request_to_json(request).dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw StageError("write to plugin failed: " + std::string(std::strerror(errno)));
      }
      written += static_cast<std::size_t>(n);
    }
    const std::string reply = read_line();
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::parse_error&) {
      throw ProtocolError("plugin sent a line that is not JSON");
    }
    PortResponse response = response_from_json(parsed, request.op);
    if (response.id != request.id)
      throw ProtocolError("plugin answered id '" + response.id + "' to request '" + request.id + "'");
    return response;
  } catch (const StageError&) {
    // The channel may be out of sync; start over on the next request.
    stop();
    throw;
  }
}

}  // namespace glasslabel

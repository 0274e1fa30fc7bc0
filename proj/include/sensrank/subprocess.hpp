#pragma once

// Minimal POSIX pipe runner: feed a string to `/bin/sh -c command` on stdin,
// collect stdout. Stderr is inherited.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>
#include <string_view>
#include <thread>

#include "sensrank/error.hpp"

extern char** environ;

namespace sensrank {

struct ProcessResult {
  int exit_code = -1;  // -1 when terminated by a signal
  std::string out;
};

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(o.release()) {}
  Fd& operator=(Fd&& o) noexcept {
    reset(o.release());
    return *this;
  }
  ~Fd() { reset(); }
  int get() const noexcept { return fd_; }
  int release() noexcept { return std::exchange(fd_, -1); }
  void reset(int fd = -1) noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
  }

 private:
  int fd_ = -1;
};

inline void make_pipe(Fd& read_end, Fd& write_end) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(Stage::fit, std::string("pipe: ") + std::strerror(errno));
  read_end.reset(fds[0]);
  write_end.reset(fds[1]);
}

// Writes all of `data`; stops quietly if the reader goes away. SIGPIPE is
// blocked on this thread and any pending instance is consumed before return.
inline void write_all_nosigpipe(int fd, std::string_view data) {
  sigset_t pipe_set, old_set;
  sigemptyset(&pipe_set);
  sigaddset(&pipe_set, SIGPIPE);
  pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);
  bool broken = false;
  while (!data.empty()) {
    const ssize_t w = ::write(fd, data.data(), data.size());
    if (w < 0) {
      if (errno == EINTR) continue;
      broken = errno == EPIPE;
      break;
    }
    data.remove_prefix(static_cast<std::size_t>(w));
  }
  if (broken) {
    const timespec zero{0, 0};
    while (sigtimedwait(&pipe_set, nullptr, &zero) > 0) {
    }
  }
  pthread_sigmask(SIG_SETMASK, &old_set, nullptr);
}

}  // namespace detail

inline ProcessResult run_shell(const std::string& command, std::string_view input) {
  detail::Fd in_r, in_w, out_r, out_w;
  detail::make_pipe(in_r, in_w);
  detail::make_pipe(out_r, out_w);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_r.get(), STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_w.get(), STDOUT_FILENO);

  const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw Error(Stage::fit, std::string("cannot launch /bin/sh: ") + std::strerror(rc));
  in_r.reset();
  out_w.reset();

  std::jthread writer([fd = std::move(in_w), input]() mutable {
    detail::write_all_nosigpipe(fd.get(), input);
    fd.reset();
  });

  ProcessResult result;
  char buf[1 << 16];
  while (true) {
    const ssize_t r = ::read(out_r.get(), buf, sizeof(buf));
    if (r < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (r == 0) break;
    result.out.append(buf, static_cast<std::size_t>(r));
  }
  writer.join();

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error(Stage::fit, std::string("waitpid: ") + std::strerror(errno));
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

}  // namespace sensrank

#include "subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

namespace streamforge::corpus {

namespace {

void set_nonblocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

/// Drains whatever is ready on fd into sink; returns false on EOF.
bool drain(int fd, std::string& sink) {
  char buf[4096];
  while (true) {
    ssize_t n = read(fd, buf, sizeof buf);
    if (n > 0) {
      sink.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    if (n == 0) return false;
    return errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR;
  }
}

}  // namespace

SubprocessResult run_subprocess(const std::vector<std::string>& argv,
                                double kill_after_s) {
  SubprocessResult result;
  int out_pipe[2] = {-1, -1};
  int err_pipe[2] = {-1, -1};
  int status_pipe[2] = {-1, -1};
  if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0 ||
      pipe2(status_pipe, O_CLOEXEC) != 0) {
    result.launch_failed = true;
    return result;
  }

  const auto start = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid < 0) {
    result.launch_failed = true;
    return result;
  }
  if (pid == 0) {
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    close(status_pipe[0]);
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    int err = errno;
    ssize_t ignored = write(status_pipe[1], &err, sizeof err);
    (void)ignored;
    _exit(127);
  }

  close(out_pipe[1]);
  close(err_pipe[1]);
  close(status_pipe[1]);
  set_nonblocking(out_pipe[0]);
  set_nonblocking(err_pipe[0]);

  bool out_open = true, err_open = true;
  bool child_done = false;
  int wait_status = 0;
  while (true) {
    if (out_open || err_open) {
      pollfd fds[2];
      nfds_t nfds = 0;
      int out_slot = -1, err_slot = -1;
      if (out_open) {
        out_slot = static_cast<int>(nfds);
        fds[nfds++] = {out_pipe[0], POLLIN, 0};
      }
      if (err_open) {
        err_slot = static_cast<int>(nfds);
        fds[nfds++] = {err_pipe[0], POLLIN, 0};
      }
      poll(fds, nfds, 20);
      if (out_slot >= 0 && fds[out_slot].revents != 0) {
        out_open = drain(out_pipe[0], result.out);
      }
      if (err_slot >= 0 && fds[err_slot].revents != 0) {
        err_open = drain(err_pipe[0], result.err);
      }
    }

    if (!child_done) {
      pid_t r = waitpid(pid, &wait_status, WNOHANG);
      if (r == pid) child_done = true;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (!child_done && elapsed > kill_after_s) {
      kill(pid, SIGKILL);
      waitpid(pid, &wait_status, 0);
      child_done = true;
      result.timed_out = true;
    }
    if (child_done && !out_open && !err_open) break;
    if (child_done && (out_open || err_open)) {
      // Final drain: writers are gone, so EOF is immediate.
      if (out_open) out_open = drain(out_pipe[0], result.out);
      if (err_open) err_open = drain(err_pipe[0], result.err);
      if (!out_open && !err_open) break;
      struct timespec ts = {0, 2000000};
      nanosleep(&ts, nullptr);
    }
  }
  close(out_pipe[0]);
  close(err_pipe[0]);

  int exec_errno = 0;
  ssize_t n = read(status_pipe[0], &exec_errno, sizeof exec_errno);
  close(status_pipe[0]);
  if (n == static_cast<ssize_t>(sizeof exec_errno)) {
    result.launch_failed = true;
    result.err = std::strerror(exec_errno);
  }

  result.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (WIFEXITED(wait_status)) {
    result.exit_code = WEXITSTATUS(wait_status);
  } else if (WIFSIGNALED(wait_status)) {
    result.exit_code = 128 + WTERMSIG(wait_status);
  }
  return result;
}

}  // namespace streamforge::corpus

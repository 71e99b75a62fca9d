#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstring>
#include <thread>

#include "thermadapt/ablation.hpp"

extern char** environ;

namespace thermadapt {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPlaceholders[] = {"SOURCE_DIR", "TARGET_DIR", "OUT_DIR", "CONFIG"};

bool known_placeholder(std::string_view name) {
  for (std::string_view p : kPlaceholders) {
    if (p == name) return true;
  }
  return false;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

bool is_name_char(char c) {
  return std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
         c == '_';
}

// Calls fn(name) for every "{NAME}" token; "${NAME}" belongs to the shell.
template <typename Fn>
std::string scan_template(const std::string& tmpl, Fn&& fn) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && (i == 0 || tmpl[i - 1] != '$')) {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_name_char(tmpl[j])) ++j;
      if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
        out += fn(tmpl.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

void check_artifact(Stage stage, const fs::path& out_dir, StageOutcome& outcome) {
  switch (stage) {
    case Stage::Translate:
      for (const auto& e : fs::directory_iterator(out_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") {
          outcome.artifact = out_dir;
          return;
        }
      }
      throw Error(ErrorCode::MissingOutput,
                  "translate hook wrote no PNG images to " + out_dir.string());
    case Stage::Train:
      if (fs::directory_iterator(out_dir) != fs::directory_iterator()) {
        outcome.artifact = out_dir;
        return;
      }
      throw Error(ErrorCode::MissingOutput, "train hook left " + out_dir.string() + " empty");
    case Stage::Detect: {
      const fs::path dets = out_dir / "detections.json";
      if (fs::is_regular_file(dets)) {
        outcome.artifact = dets;
        return;
      }
      throw Error(ErrorCode::MissingOutput, "detect hook did not write " + dets.string());
    }
  }
}

class SpawnActions {
 public:
  SpawnActions() { posix_spawn_file_actions_init(&actions_); }
  ~SpawnActions() { posix_spawn_file_actions_destroy(&actions_); }
  SpawnActions(const SpawnActions&) = delete;
  SpawnActions& operator=(const SpawnActions&) = delete;
  posix_spawn_file_actions_t* get() { return &actions_; }

 private:
  posix_spawn_file_actions_t actions_;
};

class SpawnAttr {
 public:
  SpawnAttr() { posix_spawnattr_init(&attr_); }
  ~SpawnAttr() { posix_spawnattr_destroy(&attr_); }
  SpawnAttr(const SpawnAttr&) = delete;
  SpawnAttr& operator=(const SpawnAttr&) = delete;
  posix_spawnattr_t* get() { return &attr_; }

 private:
  posix_spawnattr_t attr_;
};

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Translate: return "translate";
    case Stage::Train: return "train";
    case Stage::Detect: return "detect";
  }
  return "unknown";
}

std::string expand_hook_template(const std::string& command_template,
                                 const std::map<std::string, fs::path>& bindings) {
  return scan_template(command_template, [&](const std::string& name) {
    if (!known_placeholder(name)) {
      throw Error(ErrorCode::UnresolvedPlaceholder, "unknown placeholder {" + name + "}");
    }
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw Error(ErrorCode::UnresolvedPlaceholder, "placeholder {" + name + "} is not bound");
    }
    return shell_quote(it->second.string());
  });
}

StageOutcome run_stage_hook(Stage stage, const std::string& command_template,
                            const std::map<std::string, fs::path>& bindings,
                            std::optional<std::chrono::milliseconds> timeout) {
  auto out_it = bindings.find("OUT_DIR");
  if (out_it == bindings.end()) {
    throw Error(ErrorCode::UnresolvedPlaceholder,
                std::string(to_string(stage)) + " hook has no OUT_DIR binding");
  }
  for (const auto& [name, path] : bindings) {
    if (!known_placeholder(name)) {
      throw Error(ErrorCode::UnresolvedPlaceholder, "unknown binding {" + name + "}");
    }
    if (name != "OUT_DIR" && !fs::exists(path)) {
      throw Error(ErrorCode::UnresolvedPlaceholder,
                  "{" + name + "} is bound to missing path " + path.string());
    }
  }

  StageOutcome outcome;
  outcome.command = expand_hook_template(command_template, bindings);
  const fs::path out_dir = out_it->second;
  fs::create_directories(out_dir);
  outcome.log = out_dir.parent_path() / (out_dir.filename().string() + ".log");

  SpawnActions actions;
  const std::string log_path = outcome.log.string();
  posix_spawn_file_actions_addopen(actions.get(), STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(actions.get(), STDOUT_FILENO, log_path.c_str(),
                                   O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(actions.get(), STDOUT_FILENO, STDERR_FILENO);
  SpawnAttr attr;
  posix_spawnattr_setflags(attr.get(), POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(attr.get(), 0);

  std::string sh = "sh";
  std::string dash_c = "-c";
  char* argv[] = {sh.data(), dash_c.data(), outcome.command.data(), nullptr};
  pid_t pid = 0;
  if (int rc = posix_spawn(&pid, "/bin/sh", actions.get(), attr.get(), argv, environ); rc != 0) {
    throw Error(ErrorCode::HookFailed, std::string(to_string(stage)) +
                                           " hook could not start: " + std::strerror(rc));
  }

  int status = 0;
  if (!timeout) {
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
  } else {
    const auto deadline = std::chrono::steady_clock::now() + *timeout;
    for (;;) {
      pid_t r = waitpid(pid, &status, WNOHANG);
      if (r == pid) break;
      if (r < 0 && errno != EINTR) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        kill(-pid, SIGKILL);
        while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
        }
        throw Error(ErrorCode::HookTimeout,
                    std::string(to_string(stage)) + " hook exceeded " +
                        std::to_string(timeout->count()) + " ms: " + outcome.command);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }

  if (WIFEXITED(status)) {
    outcome.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    outcome.exit_code = 128 + WTERMSIG(status);
  } else {
    outcome.exit_code = -1;
  }
  if (outcome.exit_code != 0) {
    throw Error(ErrorCode::HookFailed, std::string(to_string(stage)) + " hook exited with " +
                                           std::to_string(outcome.exit_code) + " (log: " +
                                           log_path + "): " + outcome.command);
  }
  check_artifact(stage, out_dir, outcome);
  return outcome;
}

}  // namespace thermadapt

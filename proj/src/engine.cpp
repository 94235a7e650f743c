#include "docmt/engine.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>
#include <thread>

#include "docmt/error.h"
#include "docmt/hash.h"
#include "docmt/sampler.h"
#include "docmt/tokenize.h"

namespace docmt {

using nlohmann::json;

const char* mode_name(EngineMode mode) {
  switch (mode) {
    case EngineMode::translate:        return "translate";
    case EngineMode::translate_forced: return "translate_forced";
    case EngineMode::score:            return "score";
  }
  return "translate";
}

EngineMode parse_mode(const std::string& name) {
  if (name == "translate")        return EngineMode::translate;
  if (name == "translate_forced") return EngineMode::translate_forced;
  if (name == "score")            return EngineMode::score;
  throw ValidationError("unknown engine mode: " + name);
}

json to_json(const EngineRequest& request) {
  json j;
  j["id"] = request.id;
  j["mode"] = mode_name(request.mode);
  j["input"] = request.input;
  if (request.forced_prefix)
    j["forced_prefix"] = *request.forced_prefix;
  if (request.candidate)
    j["candidate"] = *request.candidate;
  return j;
}

EngineRequest request_from_json(const json& j) {
  EngineRequest r;
  r.id = j.at("id").get<std::string>();
  r.mode = parse_mode(j.at("mode").get<std::string>());
  r.input = j.at("input").get<std::string>();
  if (j.contains("forced_prefix") && !j["forced_prefix"].is_null())
    r.forced_prefix = j["forced_prefix"].get<std::string>();
  if (j.contains("candidate") && !j["candidate"].is_null())
    r.candidate = j["candidate"].get<std::string>();
  return r;
}

namespace {

void validate_requests(const std::vector<EngineRequest>& requests) {
  for (const auto& r : requests) {
    if ((r.mode == EngineMode::translate_forced) != r.forced_prefix.has_value())
      throw ValidationError("request " + r.id +
                            ": forced_prefix is required exactly in mode translate_forced");
    if ((r.mode == EngineMode::score) != r.candidate.has_value())
      throw ValidationError("request " + r.id +
                            ": candidate is required exactly in mode score");
  }
}

}  // namespace

MockEngineSpec MockEngineSpec::from_json(const json& j) {
  MockEngineSpec spec;
  spec.kind = j.at("kind").get<std::string>();
  if (spec.kind != "copy" && spec.kind != "lookup" && spec.kind != "scripted-pronoun")
    throw ValidationError("unknown mock engine kind: " + spec.kind);
  if (j.contains("sep"))
    spec.sep = j["sep"].get<std::string>();
  if (j.contains("table")) {
    if (!j["table"].is_object())
      throw ValidationError("mock engine: 'table' must be an object");
    spec.table = j["table"];
  }
  if (j.contains("context_window"))
    spec.context_window = j["context_window"].get<int>();
  if (j.contains("default_choice"))
    spec.default_choice = j["default_choice"].get<std::string>();
  if (j.contains("score_fn")) {
    const json& fn = j["score_fn"];
    if (!fn.is_object() || !fn.contains("kind"))
      throw ValidationError("mock engine: 'score_fn' must be an object with a 'kind'");
    std::string kind = fn["kind"].get<std::string>();
    if (kind != "neg_length" && kind != "table" && kind != "hash")
      throw ValidationError("unknown score_fn kind: " + kind);
    spec.score_fn = fn;
  }
  return spec;
}

MockEngineSpec MockEngineSpec::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return from_json(j);
}

namespace {

class MockEngine : public Engine {
 public:
  explicit MockEngine(MockEngineSpec spec) : spec_(std::move(spec)) {}

  std::vector<EngineResponse> run_batch(
      const std::vector<EngineRequest>& requests) override {
    validate_requests(requests);
    std::vector<EngineResponse> responses;
    responses.reserve(requests.size());
    for (const auto& r : requests) {
      EngineResponse resp;
      resp.id = r.id;
      switch (r.mode) {
        case EngineMode::translate:
          resp.output = translate(r.input);
          break;
        case EngineMode::translate_forced:
          resp.output = translate_forced(r.input, *r.forced_prefix);
          break;
        case EngineMode::score:
          score(r.input, *r.candidate, resp);
          break;
      }
      responses.push_back(std::move(resp));
    }
    return responses;
  }

  bool supports_score() const override { return spec_.score_fn.has_value(); }
  std::string describe() const override { return "mock:" + spec_.kind; }

 private:
  std::string translate_segment(const std::string& segment,
                                std::size_t available_left) const {
    if (spec_.kind == "copy")
      return segment;
    auto it = spec_.table.find(segment);
    if (it == spec_.table.end())
      return segment;
    if (it->is_string())
      return it->get<std::string>();
    if (it->contains("translation"))
      return (*it)["translation"].get<std::string>();
    std::string out = it->at("template").get<std::string>();
    auto distance = it->at("distance").get<std::size_t>();
    bool reachable = distance <= available_left &&
                     distance <= static_cast<std::size_t>(spec_.context_window);
    const std::string pron = reachable ? it->at("pronoun").get<std::string>()
                                       : spec_.default_choice;
    std::size_t at;
    while ((at = out.find("[PRON]")) != std::string::npos)
      out.replace(at, 6, pron);
    return out;
  }

  std::string translate(const std::string& input) const {
    auto segments = split_segments(input, spec_.sep);
    std::vector<std::string> out;
    out.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i)
      out.push_back(translate_segment(segments[i], i));
    return join_segments(out, spec_.sep);
  }

  std::string translate_forced(const std::string& input,
                               const std::string& prefix) const {
    auto segments = split_segments(input, spec_.sep);
    std::size_t covered = trim(prefix).empty()
                              ? 0
                              : split_segments(prefix, spec_.sep).size();
    if (covered == 0)
      return translate(input);
    std::vector<std::string> out;
    for (std::size_t i = std::min(covered, segments.size()); i < segments.size(); ++i)
      out.push_back(translate_segment(segments[i], i));
    if (out.empty())
      return prefix;
    return prefix + " " + join_segments(out, spec_.sep);
  }

  void score(const std::string& input, const std::string& candidate,
             EngineResponse& resp) const {
    if (!spec_.score_fn) {
      resp.flags.push_back("no-score");
      return;
    }
    const json& fn = *spec_.score_fn;
    std::string kind = fn["kind"].get<std::string>();
    if (kind == "neg_length") {
      resp.logprob = -static_cast<double>(count_tokens(candidate));
    } else if (kind == "table") {
      const json& values = fn.at("values");
      auto it = values.find(candidate);
      if (it == values.end())
        resp.flags.push_back("no-score");
      else
        resp.logprob = it->get<double>();
    } else {  // hash: fixed pseudo-random value in [-2, -1)
      std::uint64_t h = fnv1a64(input + '\x1f' + candidate);
      resp.logprob = -1.0 - std::ldexp(static_cast<double>(h), -64);
    }
  }

  MockEngineSpec spec_;
};

}  // namespace

std::unique_ptr<Engine> make_mock_engine(const MockEngineSpec& spec) {
  return std::make_unique<MockEngine>(spec);
}

SubprocessEngine::SubprocessEngine(
    std::string command, std::vector<std::pair<std::string, std::string>> env,
    int timeout_ms, bool scoring)
    : command_(std::move(command)),
      env_(std::move(env)),
      timeout_ms_(timeout_ms),
      scoring_(scoring) {
  if (command_.empty())
    throw ValidationError("engine command is empty");
}

SubprocessEngine::~SubprocessEngine() { stop(); }

void SubprocessEngine::start() {
  ::signal(SIGPIPE, SIG_IGN);
  int to_pipe[2];
  int from_pipe[2];
  if (::pipe(to_pipe) != 0 || ::pipe(from_pipe) != 0)
    throw IoError("pipe: " + std::string(std::strerror(errno)));
  int pid = ::fork();
  if (pid < 0)
    throw IoError("fork: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    // Own process group, so stop() can kill the shell and its children together.
    ::setpgid(0, 0);
    ::dup2(to_pipe[0], 0);
    ::dup2(from_pipe[1], 1);
    ::close(to_pipe[0]);
    ::close(to_pipe[1]);
    ::close(from_pipe[0]);
    ::close(from_pipe[1]);
    for (const auto& [key, value] : env_)
      ::setenv(key.c_str(), value.c_str(), 1);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_pipe[0]);
  ::close(from_pipe[1]);
  ::setpgid(pid, pid);
  child_pid_ = pid;
  to_child_ = to_pipe[1];
  from_child_ = from_pipe[0];
  ::fcntl(to_child_, F_SETFL, O_NONBLOCK);
  ::fcntl(from_child_, F_SETFL, O_NONBLOCK);
}

void SubprocessEngine::stop() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
  if (child_pid_ > 0) {
    int status = 0;
    if (::waitpid(child_pid_, &status, WNOHANG) == 0) {
      ::kill(-child_pid_, SIGKILL);
      ::waitpid(child_pid_, &status, 0);
    }
    child_pid_ = -1;
  }
}

std::vector<EngineResponse> SubprocessEngine::run_batch(
    const std::vector<EngineRequest>& requests) {
  validate_requests(requests);
  start();

  std::string outbuf;
  for (const auto& r : requests) {
    outbuf += to_json(r).dump();
    outbuf += '\n';
  }
  std::size_t written = 0;

  // A request id may repeat; match responses to pending indices in order.
  std::map<std::string, std::deque<std::size_t>> pending;
  for (std::size_t i = 0; i < requests.size(); ++i)
    pending[requests[i].id].push_back(i);
  std::size_t unanswered = requests.size();

  std::vector<EngineResponse> responses(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i)
    responses[i].id = requests[i].id;

  std::string inbuf;
  bool timed_out = false;
  bool eof = false;
  auto last_line = std::chrono::steady_clock::now();

  auto consume_line = [&](const std::string& line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      return;  // malformed line: skipped
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
      return;
    auto it = pending.find(j["id"].get<std::string>());
    if (it == pending.end() || it->second.empty())
      return;  // unknown or already-answered id
    std::size_t idx = it->second.front();
    it->second.pop_front();
    --unanswered;
    EngineResponse& resp = responses[idx];
    if (j.contains("output") && j["output"].is_string())
      resp.output = j["output"].get<std::string>();
    if (j.contains("logprob") && j["logprob"].is_number()) {
      double lp = j["logprob"].get<double>();
      if (std::isfinite(lp))
        resp.logprob = lp;
    }
    if (j.contains("flags") && j["flags"].is_array())
      for (const auto& f : j["flags"])
        if (f.is_string())
          resp.flags.push_back(f.get<std::string>());
    last_line = std::chrono::steady_clock::now();
  };

  while (unanswered > 0 && !eof && !timed_out) {
    struct pollfd fds[2];
    int nfds = 0;
    int write_slot = -1;
    int read_slot = -1;
    if (written < outbuf.size() && to_child_ >= 0) {
      write_slot = nfds;
      fds[nfds++] = {to_child_, POLLOUT, 0};
    }
    read_slot = nfds;
    fds[nfds++] = {from_child_, POLLIN, 0};

    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - last_line)
                       .count();
    int wait_ms = timeout_ms_ - static_cast<int>(elapsed);
    if (wait_ms <= 0) {
      timed_out = true;
      break;
    }
    int rc = ::poll(fds, nfds, wait_ms);
    if (rc < 0) {
      if (errno == EINTR)
        continue;
      throw IoError("poll: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) {
      timed_out = true;
      break;
    }

    if (write_slot >= 0 && (fds[write_slot].revents & (POLLOUT | POLLERR))) {
      ssize_t n = ::write(to_child_, outbuf.data() + written, outbuf.size() - written);
      if (n > 0) {
        written += static_cast<std::size_t>(n);
      } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
        written = outbuf.size();  // child closed its stdin; keep reading
      }
      if (written >= outbuf.size()) {
        ::close(to_child_);
        to_child_ = -1;
      }
    }
    if (fds[read_slot].revents & (POLLIN | POLLHUP | POLLERR)) {
      char chunk[65536];
      while (true) {
        ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n > 0) {
          inbuf.append(chunk, static_cast<std::size_t>(n));
          continue;
        }
        if (n == 0)
          eof = true;
        break;
      }
      std::size_t start = 0;
      std::size_t nl;
      while ((nl = inbuf.find('\n', start)) != std::string::npos) {
        consume_line(inbuf.substr(start, nl - start));
        start = nl + 1;
      }
      inbuf.erase(0, start);
    }
  }

  if (timed_out) {
    for (auto& [id, queue] : pending)
      for (std::size_t idx : queue)
        responses[idx].flags.push_back("timeout");
    stop();
    return responses;
  }

  if (!inbuf.empty())
    consume_line(inbuf);

  int status = 0;
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  ::waitpid(child_pid_, &status, 0);
  child_pid_ = -1;
  stop();

  bool crashed = (WIFEXITED(status) && WEXITSTATUS(status) != 0) || WIFSIGNALED(status);
  if (crashed && unanswered > 0) {
    std::ostringstream msg;
    msg << "engine command failed (";
    if (WIFEXITED(status))
      msg << "exit status " << WEXITSTATUS(status);
    else
      msg << "signal " << WTERMSIG(status);
    msg << ") with " << (requests.size() - unanswered) << " of " << requests.size()
        << " responses received";
    throw EngineError(msg.str());
  }
  for (auto& [id, queue] : pending)
    for (std::size_t idx : queue)
      responses[idx].flags.push_back("missing-response");
  return responses;
}

namespace {

class ParallelEngine : public Engine {
 public:
  explicit ParallelEngine(std::vector<std::unique_ptr<Engine>> workers)
      : workers_(std::move(workers)) {
    if (workers_.empty())
      throw ValidationError("parallel engine needs at least one worker");
  }

  std::vector<EngineResponse> run_batch(
      const std::vector<EngineRequest>& requests) override {
    std::size_t n = workers_.size();
    std::vector<std::vector<EngineRequest>> shards(n);
    for (std::size_t i = 0; i < requests.size(); ++i)
      shards[i % n].push_back(requests[i]);

    std::vector<std::vector<EngineResponse>> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
      threads.emplace_back([&, w]() {
        try {
          results[w] = workers_[w]->run_batch(shards[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads)
      t.join();
    for (const auto& e : errors)
      if (e)
        std::rethrow_exception(e);

    std::vector<EngineResponse> merged(requests.size());
    std::vector<std::size_t> cursor(n, 0);
    for (std::size_t i = 0; i < requests.size(); ++i)
      merged[i] = std::move(results[i % n][cursor[i % n]++]);
    return merged;
  }

  bool supports_score() const override { return workers_.front()->supports_score(); }
  std::string describe() const override {
    return workers_.front()->describe() + " x" + std::to_string(workers_.size());
  }

 private:
  std::vector<std::unique_ptr<Engine>> workers_;
};

}  // namespace

std::unique_ptr<Engine> make_parallel_engine(
    std::vector<std::unique_ptr<Engine>> workers) {
  if (workers.size() == 1)
    return std::move(workers.front());
  return std::make_unique<ParallelEngine>(std::move(workers));
}

std::unique_ptr<Engine> make_engine(
    const std::string& mock_spec, const std::string& engine_cmd,
    const std::vector<std::pair<std::string, std::string>>& env, int timeout_ms) {
  if (!mock_spec.empty() && !engine_cmd.empty())
    throw ValidationError("give either a mock engine or an engine command, not both");
  if (!mock_spec.empty()) {
    if (mock_spec.rfind("mock:", 0) != 0)
      throw ValidationError("engine spec must look like mock:<kind>[:<spec-file>]");
    std::string rest = mock_spec.substr(5);
    auto colon = rest.find(':');
    if (colon == std::string::npos) {
      MockEngineSpec spec;
      spec.kind = rest;
      if (spec.kind != "copy" && spec.kind != "lookup" && spec.kind != "scripted-pronoun")
        throw ValidationError("unknown mock engine kind: " + spec.kind);
      return make_mock_engine(spec);
    }
    std::string kind = rest.substr(0, colon);
    auto spec = MockEngineSpec::from_file(rest.substr(colon + 1));
    if (!kind.empty() && kind != spec.kind)
      throw ValidationError("engine spec kind '" + kind +
                            "' does not match spec file kind '" + spec.kind + "'");
    return make_mock_engine(spec);
  }
  if (engine_cmd.empty())
    throw ValidationError("no engine given (use --engine or --engine-cmd)");
  return std::make_unique<SubprocessEngine>(engine_cmd, env, timeout_ms);
}

}  // namespace docmt

#pragma once

#include <cctype>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pomdp_shield/formula.hpp"
#include "pomdp_shield/rational.hpp"
#include "pomdp_shield/solver.hpp"
#include "pomdp_shield/util.hpp"

namespace pomdp_shield {

inline void write_smt_number(std::ostream& out, long long v) {
  if (v < 0) {
    out << "(- " << -(v + 1) + 1ull << ")";
  } else {
    out << v;
  }
}

inline void write_smt_formula(std::ostream& out, Formula const& f,
                              std::vector<VarInfo> const& declarations) {
  auto const& n = f.node();
  switch (n.kind) {
    case Formula::Kind::constant:
      out << (n.value ? "true" : "false");
      return;
    case Formula::Kind::bool_var:
      out << declarations[n.var].name;
      return;
    case Formula::Kind::int_eq:
      out << "(= " << declarations[n.var].name << " ";
      write_smt_number(out, n.bound);
      out << ")";
      return;
    case Formula::Kind::int_le:
      out << "(<= " << declarations[n.var].name << " ";
      write_smt_number(out, n.bound);
      out << ")";
      return;
    case Formula::Kind::rank_gt:
      out << "(> " << declarations[n.var].name << " " << declarations[n.var2].name << ")";
      return;
    case Formula::Kind::negation:
      out << "(not ";
      write_smt_formula(out, n.children[0], declarations);
      out << ")";
      return;
    case Formula::Kind::conjunction:
    case Formula::Kind::disjunction:
    case Formula::Kind::implication:
    case Formula::Kind::equivalence: {
      char const* op = n.kind == Formula::Kind::conjunction   ? "and"
                       : n.kind == Formula::Kind::disjunction ? "or"
                       : n.kind == Formula::Kind::implication ? "=>"
                                                              : "=";
      out << "(" << op;
      for (auto const& child : n.children) {
        out << " ";
        write_smt_formula(out, child, declarations);
      }
      out << ")";
      return;
    }
  }
  throw ModelError("unreachable formula kind in serializer");
}

inline std::string to_smtlib(Formula const& f, std::vector<VarInfo> const& declarations) {
  std::ostringstream out;
  write_smt_formula(out, f, declarations);
  return out.str();
}

namespace detail {

// Minimal s-expression reader for solver responses.
struct SExpr {
  std::string atom;
  std::vector<SExpr> items;
  bool is_atom() const { return items.empty() && !atom.empty(); }
};

inline SExpr parse_sexpr(std::string const& text, std::size_t& pos) {
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
    ++pos;
  }
  if (pos >= text.size()) {
    throw ModelError("truncated solver response");
  }
  SExpr node;
  if (text[pos] == '(') {
    ++pos;
    while (true) {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
        ++pos;
      }
      if (pos >= text.size()) {
        throw ModelError("unbalanced solver response");
      }
      if (text[pos] == ')') {
        ++pos;
        return node;
      }
      node.items.push_back(parse_sexpr(text, pos));
    }
  }
  std::size_t start = pos;
  if (text[pos] == '"') {
    ++pos;
    while (pos < text.size() && text[pos] != '"') {
      ++pos;
    }
    if (pos < text.size()) {
      ++pos;
    }
  } else {
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')') {
      ++pos;
    }
  }
  node.atom = text.substr(start, pos - start);
  return node;
}

inline Rational parse_smt_rational(SExpr const& e) {
  if (e.is_atom()) {
    auto const& s = e.atom;
    auto dot = s.find('.');
    if (dot == std::string::npos) {
      return Rational(std::stoll(s));
    }
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    long long denominator = 1;
    for (std::size_t i = dot + 1; i < s.size(); ++i) {
      denominator *= 10;
    }
    return Rational(std::stoll(digits), denominator);
  }
  if (!e.items.empty() && e.items[0].atom == "-" && e.items.size() == 2) {
    return -parse_smt_rational(e.items[1]);
  }
  if (!e.items.empty() && e.items[0].atom == "/" && e.items.size() == 3) {
    return parse_smt_rational(e.items[1]) / parse_smt_rational(e.items[2]);
  }
  throw ModelError("cannot parse solver numeral");
}

}  // namespace detail

// Session speaking SMT-LIB 2 to an external process spawned from a shell command. The
// child is synchronized through :print-success acknowledgements; responses are read
// with a poll loop so a configured deadline can kill a stuck solver and report unknown.
class SmtLibSolver final : public SolverSession {
 public:
  explicit SmtLibSolver(std::string command, std::string transcript_path = "")
      : command_(std::move(command)) {
    static std::once_flag pipe_flag;
    std::call_once(pipe_flag, [] { std::signal(SIGPIPE, SIG_IGN); });
    if (!transcript_path.empty()) {
      transcript_.open(transcript_path, std::ios::out | std::ios::trunc);
    }
    spawn();
    command_line("(set-option :print-success true)");
    command_line("(set-logic QF_LIRA)");
  }

  ~SmtLibSolver() override { shutdown(); }

  SmtLibSolver(SmtLibSolver const&) = delete;
  SmtLibSolver& operator=(SmtLibSolver const&) = delete;

 protected:
  void on_declare(VarId v) override {
    auto const& d = info(v);
    char const* sort = d.sort == VarSort::boolean      ? "Bool"
                       : d.sort == VarSort::bounded_int ? "Int"
                                                         : "Real";
    command_line("(declare-const " + d.name + " " + sort + ")");
    if (d.sort == VarSort::bounded_int) {
      std::ostringstream bounds;
      bounds << "(assert (and (<= ";
      write_smt_number(bounds, d.lo);
      bounds << " " << d.name << ") (<= " << d.name << " ";
      write_smt_number(bounds, d.hi);
      bounds << ")))";
      command_line(bounds.str());
    }
  }

  void on_assert(Formula const& f) override {
    command_line("(assert " + to_smtlib(f, declarations_) + ")");
  }

  void on_push() override { command_line("(push 1)"); }

  void on_pop() override { command_line("(pop 1)"); }

  CheckResult do_check(std::vector<Formula> const& assumptions) override {
    if (dead_) {
      return CheckResult::unknown;
    }
    std::string query = "(check-sat)";
    if (!assumptions.empty()) {
      std::ostringstream out;
      out << "(check-sat-assuming (";
      for (std::size_t i = 0; i < assumptions.size(); ++i) {
        auto [var, negated] = literal_parts(assumptions[i]);
        if (i > 0) {
          out << " ";
        }
        if (negated) {
          out << "(not " << declarations_[var].name << ")";
        } else {
          out << declarations_[var].name;
        }
      }
      out << "))";
      query = out.str();
    }
    send_line(query);
    std::optional<std::string> reply = read_response();
    if (!reply) {
      return CheckResult::unknown;  // deadline hit, child killed
    }
    if (*reply == "sat") {
      return CheckResult::sat;
    }
    if (*reply == "unsat") {
      return CheckResult::unsat;
    }
    if (*reply == "unknown") {
      return CheckResult::unknown;
    }
    throw ModelError("unexpected check-sat reply: " + *reply);
  }

  void extract_model(Model& out) override {
    std::vector<VarId> queried;
    std::ostringstream query;
    query << "(get-value (";
    for (std::size_t v = 0; v < declarations_.size(); ++v) {
      if (!declarations_[v].alive) {
        continue;
      }
      if (!queried.empty()) {
        query << " ";
      }
      query << declarations_[v].name;
      queried.push_back(static_cast<VarId>(v));
    }
    query << "))";
    if (queried.empty()) {
      return;
    }
    send_line(query.str());
    std::optional<std::string> reply = read_response();
    if (!reply) {
      throw BudgetExceeded("solver timed out while reporting a model");
    }
    std::size_t pos = 0;
    detail::SExpr parsed = detail::parse_sexpr(*reply, pos);
    if (parsed.is_atom() || parsed.items.size() != queried.size()) {
      throw ModelError("malformed get-value reply");
    }
    for (std::size_t i = 0; i < queried.size(); ++i) {
      auto const& pair = parsed.items[i];
      if (pair.items.size() != 2) {
        throw ModelError("malformed get-value entry");
      }
      VarId id = queried[i];
      auto const& value = pair.items[1];
      switch (declarations_[id].sort) {
        case VarSort::boolean:
          out.booleans[id] = value.atom == "true";
          break;
        case VarSort::bounded_int: {
          Rational r = detail::parse_smt_rational(value);
          if (r.denominator() != 1) {
            throw ModelError("fractional value for integer " + declarations_[id].name);
          }
          out.integers[id] = r.numerator();
          break;
        }
        case VarSort::rank:
          out.ranks[id] = detail::parse_smt_rational(value);
          break;
      }
    }
  }

 private:
  void spawn() {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
      throw ModelError("cannot create solver pipes");
    }
    pid_ = fork();
    if (pid_ < 0) {
      throw ModelError("cannot fork solver process");
    }
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
  }

  void shutdown() {
    if (pid_ > 0 && !dead_ && in_fd_ >= 0) {
      std::string line = "(exit)\n";
      ssize_t ignored = write(in_fd_, line.data(), line.size());
      (void)ignored;
    }
    if (in_fd_ >= 0) {
      close(in_fd_);
      in_fd_ = -1;
    }
    for (int i = 0; pid_ > 0 && i < 50; ++i) {
      int status = 0;
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        break;
      }
      usleep(10000);
    }
    if (pid_ > 0) {
      kill(pid_, SIGKILL);
      int status = 0;
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
    if (out_fd_ >= 0) {
      close(out_fd_);
      out_fd_ = -1;
    }
  }

  void kill_child() {
    if (pid_ > 0) {
      kill(pid_, SIGKILL);
      int status = 0;
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
    dead_ = true;
  }

  void send_line(std::string const& line) {
    if (dead_) {
      throw ModelError("solver process is gone");
    }
    if (transcript_.is_open()) {
      transcript_ << line << "\n";
      transcript_.flush();
    }
    std::string payload = line + "\n";
    std::size_t sent = 0;
    while (sent < payload.size()) {
      ssize_t n = write(in_fd_, payload.data() + sent, payload.size() - sent);
      if (n <= 0) {
        kill_child();
        throw ModelError("solver process closed its input");
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  void command_line(std::string const& line) {
    send_line(line);
    std::optional<std::string> reply = read_response();
    if (!reply) {
      throw BudgetExceeded("solver timed out");
    }
    if (*reply != "success") {
      throw ModelError("solver rejected command: " + *reply);
    }
  }

  // Reads one response: either a bare atom line or a balanced s-expression. Returns
  // nullopt when the deadline expires first (the child is killed).
  std::optional<std::string> read_response() {
    std::string text;
    int depth = 0;
    bool seen_any = false;
    while (true) {
      while (cursor_ < buffer_.size()) {
        char c = buffer_[cursor_++];
        if (!seen_any && std::isspace(static_cast<unsigned char>(c))) {
          continue;
        }
        seen_any = true;
        if (c == '(') {
          ++depth;
        } else if (c == ')') {
          --depth;
        }
        if (c == '\n' && depth <= 0) {
          finish_response(text);
          return text;
        }
        text.push_back(c);
      }
      buffer_.clear();
      cursor_ = 0;
      struct pollfd pfd {
        out_fd_, POLLIN, 0
      };
      int wait_ms = -1;
      if (deadline_) {
        auto now = std::chrono::steady_clock::now();
        if (now >= *deadline_) {
          kill_child();
          if (transcript_.is_open()) {
            transcript_ << ";; deadline expired\n";
          }
          return std::nullopt;
        }
        wait_ms = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(*deadline_ - now).count() + 1);
      }
      int ready = poll(&pfd, 1, wait_ms);
      if (ready == 0) {
        kill_child();
        if (transcript_.is_open()) {
          transcript_ << ";; deadline expired\n";
        }
        return std::nullopt;
      }
      if (ready < 0) {
        kill_child();
        throw ModelError("solver poll failed");
      }
      char chunk[4096];
      ssize_t n = read(out_fd_, chunk, sizeof chunk);
      if (n <= 0) {
        kill_child();
        throw ModelError("solver process closed its output");
      }
      buffer_.assign(chunk, static_cast<std::size_t>(n));
    }
  }

  void finish_response(std::string& text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
      text.pop_back();
    }
    if (transcript_.is_open()) {
      transcript_ << ";; " << text << "\n";
      transcript_.flush();
    }
    if (text.rfind("(error", 0) == 0) {
      throw ModelError("solver error: " + text);
    }
  }

  std::string command_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  bool dead_ = false;
  std::string buffer_;
  std::size_t cursor_ = 0;
  std::ofstream transcript_;
};

struct SolverOptions {
  std::optional<std::string> smt_command;  // overrides POMDP_SHIELD_SMT_CMD
  std::string transcript_path;
};

// The in-process backend is the default; an external SMT-LIB solver is used when a
// command is configured explicitly or through POMDP_SHIELD_SMT_CMD.
inline std::unique_ptr<SolverSession> make_solver(SolverOptions const& options = {}) {
  std::string command = options.smt_command.value_or("");
  if (command.empty()) {
    char const* env = std::getenv("POMDP_SHIELD_SMT_CMD");
    if (env != nullptr) {
      command = env;
    }
  }
  if (command.empty()) {
    return std::make_unique<InternalSolver>();
  }
  return std::make_unique<SmtLibSolver>(std::move(command), options.transcript_path);
}

}  // namespace pomdp_shield

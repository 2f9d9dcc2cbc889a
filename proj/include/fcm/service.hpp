#pragma once

// Rater-facing judgment collection. RatingService holds the logic and is
// usable without a network; install_routes exposes it as HTTP+JSON under /v1.
//
// Sessions are unguessable tokens issued against the rater roster. Each
// session pulls one scheduled assignment at a time; an assignment is held by
// at most one session until judged. Responses never name annotation authors:
// pairs are addressed by opaque random ids.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fcm/core.hpp"
#include "fcm/elo.hpp"
#include "fcm/storage.hpp"

namespace httplib {
class Server;
}

namespace fcm {

enum class Choice { Left, Right, Tie };

std::string_view to_string(Choice c);
// Accepts left|right|tie. Throws ValidationError.
Choice parse_choice(std::string_view raw);

struct EdgeView {
  std::string source;
  std::string target;
  std::string direction;

  friend bool operator==(const EdgeView&, const EdgeView&) = default;
};

struct Progress {
  std::size_t judged = 0;
  std::size_t total = 0;
};

struct PairView {
  std::string pair_id;
  std::string passage_text;
  std::vector<EdgeView> left;
  std::vector<EdgeView> right;
  Progress progress;
};

enum class SubmitStatus { Accepted, Duplicate };

struct GuidelineSet {
  std::vector<std::string> items;  // highest priority first
  std::string conflict_rule;
};

struct ServiceOptions {
  TournamentConfig tournament;
  GuidelineSet guidelines{default_guidelines(), default_conflict_rule()};
  // Milliseconds since the epoch; injectable for tests.
  std::function<std::int64_t()> clock;
};

class RatingService {
 public:
  // Assignments whose judgments are already in the log start out judged.
  RatingService(Dataset dataset, std::vector<Assignment> assignments, std::vector<Rater> roster,
                std::shared_ptr<JudgmentLog> log, ServiceOptions options = {});

  // Schedule from the workspace's dataset, roster and scheduler config.
  static std::unique_ptr<RatingService> from_workspace(const Workspace& workspace);

  // Throws InvalidSession for raters outside the roster.
  std::string open_session(const std::string& rater_id);

  // The session's pending pair, or the next free unjudged assignment; nullopt
  // when none remain. Throws InvalidSession.
  std::optional<PairView> next_pair(const std::string& session_id);

  // Throws InvalidSession, UnknownPair, AlreadyJudged.
  SubmitStatus submit(const std::string& session_id, const std::string& pair_id, Choice choice,
                      const std::string& client_id);

  // Throws UnknownPassage.
  Leaderboard standings(const std::string& passage_id) const;

  const GuidelineSet& guidelines() const noexcept { return options_.guidelines; }

  // Throws InvalidSession.
  Progress progress(const std::string& session_id) const;

  const JudgmentLog& log() const noexcept { return *log_; }

 private:
  struct Slot {
    Assignment assignment;
    std::string pair_id;
    bool judged = false;
    std::string holder;  // session currently holding the slot
  };
  struct Session {
    std::string rater_id;
    std::int64_t issued_at = 0;
    std::optional<std::size_t> pending;
  };

  Session& session_or_throw(const std::string& session_id);
  const Session& session_or_throw(const std::string& session_id) const;
  Progress progress_of(const std::string& rater_id) const;
  PairView view_of(std::size_t slot) const;
  std::string client_key(const std::string& rater_id, const std::string& client_id) const;

  Dataset dataset_;
  std::set<std::string> roster_;
  std::shared_ptr<JudgmentLog> log_;
  ServiceOptions options_;

  mutable std::mutex mutex_;
  std::vector<Slot> slots_;
  std::map<std::string, std::size_t> slot_by_pair_;
  std::map<std::string, Session> sessions_;
  std::set<std::string> client_keys_;
  std::uint64_t sequence_ = 0;
};

// 128-bit random token, hex encoded, from the system CSPRNG.
std::string random_token();

// Registers the /v1 endpoints. Errors are returned as {"error", "message"}.
void install_routes(httplib::Server& server, RatingService& service);

}  // namespace fcm

#include "fcm/service.hpp"

#include <algorithm>
#include <cstdio>
#include <tuple>

#include <httplib.h>
#include <openssl/rand.h>

namespace fcm {

using nlohmann::json;

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::Left: return "left";
    case Choice::Right: return "right";
    case Choice::Tie: return "tie";
  }
  return "tie";
}

Choice parse_choice(std::string_view raw) {
  const std::string s = fold_case(raw);
  if (s == "left") return Choice::Left;
  if (s == "right") return Choice::Right;
  if (s == "tie") return Choice::Tie;
  throw Error(ErrorCode::ValidationError, "outcome must be left, right or tie");
}

std::string random_token() {
  unsigned char bytes[16];
  if (RAND_bytes(bytes, sizeof bytes) != 1) {
    throw Error(ErrorCode::StorageError, "system random source unavailable");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 15]);
  }
  return out;
}

namespace {

using PairKey = std::tuple<std::string, std::string, std::string, std::string>;

PairKey key_of(const std::string& rater, const std::string& passage, const std::string& a,
               const std::string& b) {
  const auto [lo, hi] = std::minmax(a, b);
  return {rater, passage, lo, hi};
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

RatingService::RatingService(Dataset dataset, std::vector<Assignment> assignments,
                             std::vector<Rater> roster, std::shared_ptr<JudgmentLog> log,
                             ServiceOptions options)
    : dataset_(std::move(dataset)), log_(std::move(log)), options_(std::move(options)) {
  if (!log_) throw Error(ErrorCode::InvalidConfig, "a judgment log is required");
  if (!options_.clock) options_.clock = system_clock_ms;
  options_.tournament.validate();
  for (const auto& r : roster) roster_.insert(r.rater_id);

  std::map<PairKey, std::size_t> already;
  const std::vector<Judgment> existing = log_->snapshot();
  for (const auto& j : existing) {
    ++already[key_of(j.rater_id, j.passage_id, j.annotation_a, j.annotation_b)];
    const auto dash = j.judgment_id.rfind('-');
    if (dash != std::string::npos) client_keys_.insert(j.judgment_id.substr(dash + 1));
  }
  sequence_ = existing.size();

  for (auto& a : assignments) {
    if (!dataset_.has_passage(a.passage_id)) {
      throw Error(ErrorCode::UnknownPassage, "assignment for '" + a.passage_id + "'");
    }
    if (a.rater_id == a.left || a.rater_id == a.right) {
      throw Error(ErrorCode::SelfRating, "rater '" + a.rater_id + "' assigned own annotation");
    }
    Slot slot;
    auto& count = already[key_of(a.rater_id, a.passage_id, a.left, a.right)];
    if (count > 0) {
      slot.judged = true;
      --count;
    }
    do {
      slot.pair_id = random_token();
    } while (slot_by_pair_.count(slot.pair_id) != 0);
    slot.assignment = std::move(a);
    slot_by_pair_.emplace(slot.pair_id, slots_.size());
    slots_.push_back(std::move(slot));
  }
}

std::unique_ptr<RatingService> RatingService::from_workspace(const Workspace& workspace) {
  const WorkspaceConfig& config = workspace.config();
  Dataset dataset = workspace.load_dataset();

  std::vector<PairingRequest> requests;
  for (const auto& p : dataset.passages()) {
    PairingRequest r{p.passage_id, {}};
    for (const Annotation* a : dataset.annotations_for(p.passage_id)) {
      r.annotations.push_back(a->id());
    }
    if (r.annotations.size() >= 2) requests.push_back(std::move(r));
  }
  std::vector<std::string> rater_ids;
  for (const auto& r : config.raters) rater_ids.push_back(r.rater_id);
  Schedule schedule = build_pairings(requests, rater_ids, config.scheduler);

  ServiceOptions options;
  options.tournament = config.tournament;
  options.guidelines = {config.guidelines, config.conflict_rule};
  return std::make_unique<RatingService>(std::move(dataset), std::move(schedule.assignments),
                                         config.raters,
                                         std::make_shared<JudgmentLog>(workspace.judgment_log_path()),
                                         std::move(options));
}

RatingService::Session& RatingService::session_or_throw(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::InvalidSession, "unknown session");
  return it->second;
}

const RatingService::Session& RatingService::session_or_throw(const std::string& session_id) const {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::InvalidSession, "unknown session");
  return it->second;
}

std::string RatingService::open_session(const std::string& rater_id) {
  std::lock_guard lock(mutex_);
  if (roster_.count(rater_id) == 0) {
    throw Error(ErrorCode::InvalidSession, "rater '" + rater_id + "' is not on the roster");
  }
  std::string id;
  do {
    id = random_token();
  } while (sessions_.count(id) != 0);
  sessions_.emplace(id, Session{rater_id, options_.clock(), std::nullopt});
  return id;
}

Progress RatingService::progress_of(const std::string& rater_id) const {
  Progress p;
  for (const auto& s : slots_) {
    if (s.assignment.rater_id != rater_id) continue;
    ++p.total;
    if (s.judged) ++p.judged;
  }
  return p;
}

PairView RatingService::view_of(std::size_t index) const {
  const Slot& slot = slots_[index];
  PairView view;
  view.pair_id = slot.pair_id;
  view.passage_text = dataset_.find_passage(slot.assignment.passage_id)->text;
  auto edges_of = [&](const std::string& annotator) {
    std::vector<EdgeView> out;
    if (const Annotation* a = dataset_.find_annotation(slot.assignment.passage_id, annotator)) {
      for (const auto& e : a->edges) {
        out.push_back({e.source(), e.target(), std::string(to_string(e.direction()))});
      }
    }
    return out;
  };
  view.left = edges_of(slot.assignment.left);
  view.right = edges_of(slot.assignment.right);
  view.progress = progress_of(slot.assignment.rater_id);
  return view;
}

std::optional<PairView> RatingService::next_pair(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  Session& session = session_or_throw(session_id);
  if (session.pending && !slots_[*session.pending].judged) return view_of(*session.pending);

  session.pending.reset();
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    Slot& s = slots_[i];
    if (s.judged || s.assignment.rater_id != session.rater_id) continue;
    if (!s.holder.empty() && s.holder != session_id && sessions_.count(s.holder) != 0) continue;
    s.holder = session_id;
    session.pending = i;
    return view_of(i);
  }
  return std::nullopt;
}

std::string RatingService::client_key(const std::string& rater_id,
                                      const std::string& client_id) const {
  return sha256_hex(rater_id + '\n' + client_id).substr(0, 16);
}

SubmitStatus RatingService::submit(const std::string& session_id, const std::string& pair_id,
                                   Choice choice, const std::string& client_id) {
  std::lock_guard lock(mutex_);
  Session& session = session_or_throw(session_id);
  if (client_id.empty()) throw Error(ErrorCode::ValidationError, "client_id is required");
  const std::string key = client_key(session.rater_id, client_id);
  if (client_keys_.count(key) != 0) return SubmitStatus::Duplicate;

  auto it = slot_by_pair_.find(pair_id);
  if (it == slot_by_pair_.end() || slots_[it->second].assignment.rater_id != session.rater_id) {
    throw Error(ErrorCode::UnknownPair, "pair was not issued to this session");
  }
  Slot& slot = slots_[it->second];
  if (slot.judged) throw Error(ErrorCode::AlreadyJudged, "pair has already been judged");
  if (slot.holder != session_id) {
    throw Error(ErrorCode::UnknownPair, "pair was not issued to this session");
  }

  const std::int64_t now = options_.clock();
  char prefix[48];
  std::snprintf(prefix, sizeof prefix, "%013lld-%08llu-", static_cast<long long>(now),
                static_cast<unsigned long long>(sequence_));
  Judgment j;
  j.judgment_id = prefix + key;
  j.passage_id = slot.assignment.passage_id;
  j.annotation_a = slot.assignment.left;
  j.annotation_b = slot.assignment.right;
  j.outcome = choice == Choice::Left    ? Outcome::AWins
              : choice == Choice::Right ? Outcome::BWins
                                        : Outcome::Tie;
  j.rater_id = session.rater_id;
  j.submitted_at = now;
  log_->append(j);

  ++sequence_;
  client_keys_.insert(key);
  slot.judged = true;
  slot.holder.clear();
  session.pending.reset();
  return SubmitStatus::Accepted;
}

Leaderboard RatingService::standings(const std::string& passage_id) const {
  if (!dataset_.has_passage(passage_id)) {
    throw Error(ErrorCode::UnknownPassage, "passage '" + passage_id + "'");
  }
  std::vector<std::string> ids;
  for (const Annotation* a : dataset_.annotations_for(passage_id)) ids.push_back(a->id());
  return run_tournament(passage_id, log_->snapshot_for(passage_id), options_.tournament, ids);
}

Progress RatingService::progress(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return progress_of(session_or_throw(session_id).rater_id);
}

// ---- HTTP ----------------------------------------------------------------------

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSession: return 401;
    case ErrorCode::UnknownPair:
    case ErrorCode::UnknownPassage: return 404;
    case ErrorCode::AlreadyJudged: return 409;
    case ErrorCode::StorageError: return 500;
    default: return 400;
  }
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  reply(res, status_for(code), {{"error", std::string(to_string(code))}, {"message", message}});
}

template <typename F>
httplib::Server::Handler guarded(F handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      reply_error(res, e.code(), e.message());
    } catch (const json::exception& e) {
      reply_error(res, ErrorCode::ValidationError, std::string("malformed request: ") + e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body);
  if (!body.is_object()) throw Error(ErrorCode::ValidationError, "body must be a JSON object");
  return body;
}

std::string string_field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorCode::ValidationError, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

json edges_json(const std::vector<EdgeView>& edges) {
  json out = json::array();
  for (const auto& e : edges) {
    out.push_back({{"source", e.source}, {"target", e.target}, {"direction", e.direction}});
  }
  return out;
}

json progress_json(const Progress& p) { return {{"done", p.judged}, {"total", p.total}}; }

}  // namespace

void install_routes(httplib::Server& server, RatingService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server.Post("/v1/sessions", guarded([&service](const httplib::Request& req,
                                                 httplib::Response& res) {
                const json body = parse_body(req);
                reply(res, 201, {{"session_id", service.open_session(string_field(body, "rater_id"))}});
              }));

  server.Get("/v1/pairs/next", guarded([&service](const httplib::Request& req,
                                                  httplib::Response& res) {
               const auto pair = service.next_pair(req.get_param_value("session"));
               if (!pair) {
                 reply(res, 200, {{"done", true}});
                 return;
               }
               reply(res, 200,
                     {{"done", false},
                      {"pair_id", pair->pair_id},
                      {"passage_text", pair->passage_text},
                      {"left", edges_json(pair->left)},
                      {"right", edges_json(pair->right)},
                      {"progress", progress_json(pair->progress)}});
             }));

  server.Post("/v1/judgments", guarded([&service](const httplib::Request& req,
                                                  httplib::Response& res) {
                const json body = parse_body(req);
                const SubmitStatus status = service.submit(
                    string_field(body, "session"), string_field(body, "pair_id"),
                    parse_choice(string_field(body, "outcome")), string_field(body, "client_id"));
                reply(res, 200,
                      {{"status", status == SubmitStatus::Accepted ? "accepted" : "duplicate"}});
              }));

  server.Get(R"(/v1/standings/([^/]+))", guarded([&service](const httplib::Request& req,
                                                            httplib::Response& res) {
               const Leaderboard board = service.standings(req.matches[1].str());
               json ranking = json::array();
               for (const auto& e : board.ranking) {
                 ranking.push_back({{"annotation_id", e.annotation_id},
                                    {"rating", e.rating},
                                    {"rank", e.rank},
                                    {"games", e.games}});
               }
               reply(res, 200, {{"passage_id", board.passage_id}, {"ranking", std::move(ranking)}});
             }));

  server.Get("/v1/guidelines", guarded([&service](const httplib::Request&, httplib::Response& res) {
               const GuidelineSet& g = service.guidelines();
               json body = {{"guidelines", g.items}};
               if (!g.conflict_rule.empty()) body["conflict_rule"] = g.conflict_rule;
               reply(res, 200, body);
             }));

  server.Get("/v1/progress", guarded([&service](const httplib::Request& req,
                                                httplib::Response& res) {
               reply(res, 200, progress_json(service.progress(req.get_param_value("session"))));
             }));
}

}  // namespace fcm

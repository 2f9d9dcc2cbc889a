#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "fcm/error.hpp"
#include "fcm/http_util.hpp"
#include "fcm/text_similarity.hpp"

namespace fcm {

using nlohmann::json;

namespace {

double read_score(const json& value) {
  if (!value.is_number()) throw Error(ErrorCode::MalformedScore, "score is not a number");
  const double v = value.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::MalformedScore, "score is not finite");
  return v;
}

}  // namespace

ExternalScorer::ExternalScorer(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}

std::size_t ExternalScorer::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

double ExternalScorer::score(std::string_view candidate, std::string_view reference) const {
  auto key = std::make_pair(std::string(candidate), std::string(reference));
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }

  const json body = {{"candidate", key.first}, {"reference", key.second}};
  const std::string reply = http_post_json(endpoint_.base_url, "/score", body.dump(),
                                           endpoint_.timeout);
  json parsed;
  try {
    parsed = json::parse(reply);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedScore, std::string("reply is not JSON: ") + e.what());
  }
  if (!parsed.is_object() || !parsed.contains("score")) {
    throw Error(ErrorCode::MalformedScore, "reply has no 'score'");
  }
  const double v = read_score(parsed["score"]);

  std::lock_guard lock(mutex_);
  cache_.emplace(std::move(key), v);
  return v;
}

std::vector<double> ExternalScorer::score_batch(const std::vector<std::string>& candidates,
                                                const std::vector<std::string>& references) const {
  if (candidates.size() != references.size()) {
    throw Error(ErrorCode::InvalidConfig, "batch arrays differ in length");
  }
  if (candidates.empty()) return {};
  const json body = {{"candidates", candidates}, {"references", references}};
  const std::string reply = http_post_json(endpoint_.base_url, "/score_batch", body.dump(),
                                           endpoint_.timeout);
  json parsed;
  try {
    parsed = json::parse(reply);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedScore, std::string("reply is not JSON: ") + e.what());
  }
  if (!parsed.is_object() || !parsed.contains("scores") || !parsed["scores"].is_array() ||
      parsed["scores"].size() != candidates.size()) {
    throw Error(ErrorCode::MalformedScore, "reply has no matching 'scores' array");
  }
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& v : parsed["scores"]) out.push_back(read_score(v));

  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < out.size(); ++i) {
    cache_.emplace(std::make_pair(candidates[i], references[i]), out[i]);
  }
  return out;
}

}  // namespace fcm

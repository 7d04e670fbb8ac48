// Copyright 2026 The Selex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "selex/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "selex/error.hpp"
#include "selex/log.hpp"

namespace selex {

using json = nlohmann::json;

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_ / "models");
  open_log(sessions_log_, "sessions.jsonl");
  open_log(inputs_log_, "inputs.jsonl");
  open_log(decisions_log_, "decisions.jsonl");
  open_log(surveys_log_, "surveys.jsonl");

  for (const auto& line : replay(sessions_log_)) {
    Session s = session_from_json(json::parse(line));
    sessions_.insert_or_assign(s.session_id, std::move(s));
  }
  for (const auto& line : replay(inputs_log_)) {
    inputs_.push_back(record_from_json_line(line));
  }
  for (const auto& line : replay(decisions_log_)) {
    decisions_.push_back(decision_from_json(json::parse(line)));
  }
  for (const auto& line : replay(surveys_log_)) {
    surveys_.push_back(survey_from_json(json::parse(line)));
  }
}

SessionStore::~SessionStore() {
  for (Log* log : {&sessions_log_, &inputs_log_, &decisions_log_, &surveys_log_}) {
    if (log->fd >= 0) ::close(log->fd);
  }
}

void SessionStore::open_log(Log& log, const char* name) {
  log.path = dir_ / name;
  // Drop a torn tail left by a crash during an unacknowledged write.
  if (std::filesystem::exists(log.path)) {
    std::ifstream in(log.path, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    if (!data.empty() && data.back() != '\n') {
      const auto keep = data.rfind('\n');
      const auto size = keep == std::string::npos ? 0 : keep + 1;
      warn(log.path.string() + ": dropping " + std::to_string(data.size() - size) +
           " bytes of incomplete trailing record");
      std::filesystem::resize_file(log.path, size);
    }
  }
  log.fd = ::open(log.path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log.fd < 0) {
    throw IoError("cannot open " + log.path.string() + ": " + std::strerror(errno));
  }
}

void SessionStore::append_line(Log& log, const std::string& line) {
  std::string buf = line;
  buf.push_back('\n');
  const char* p = buf.data();
  std::size_t left = buf.size();
  while (left > 0) {
    const ssize_t n = ::write(log.fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write to " + log.path.string() + " failed: " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(log.fd) != 0) {
    throw IoError("fsync of " + log.path.string() + " failed: " + std::strerror(errno));
  }
}

std::vector<std::string> SessionStore::replay(const Log& log) const {
  std::vector<std::string> lines;
  std::ifstream in(log.path, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void SessionStore::put_session(const Session& s) {
  std::lock_guard lock(mutex_);
  append_line(sessions_log_, session_to_json(s).dump());
  sessions_.insert_or_assign(s.session_id, s);
}

std::optional<Session> SessionStore::get_session(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::vector<Session> SessionStore::sessions() const {
  std::lock_guard lock(mutex_);
  std::vector<Session> out;
  out.reserve(sessions_.size());
  for (const auto& [id, s] : sessions_) out.push_back(s);
  return out;
}

std::size_t SessionStore::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

void SessionStore::append_inputs(std::span<const InputRecord> records) {
  std::lock_guard lock(mutex_);
  if (records.empty()) return;
  std::string batch;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i > 0) batch.push_back('\n');
    batch += record_to_json_line(records[i]);
  }
  append_line(inputs_log_, batch);
  inputs_.insert(inputs_.end(), records.begin(), records.end());
}

void SessionStore::append_decision(const Decision& d) {
  std::lock_guard lock(mutex_);
  append_line(decisions_log_, decision_to_json(d).dump());
  decisions_.push_back(d);
}

void SessionStore::append_survey(const SurveyResponse& r) {
  std::lock_guard lock(mutex_);
  append_line(surveys_log_, survey_to_json(r).dump());
  surveys_.push_back(r);
}

std::vector<InputRecord> SessionStore::inputs() const {
  std::lock_guard lock(mutex_);
  return inputs_;
}

std::vector<InputRecord> SessionStore::inputs_for(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  std::vector<InputRecord> out;
  for (const auto& r : inputs_) {
    if (r.session_id == session_id) out.push_back(r);
  }
  return out;
}

bool SessionStore::has_inputs(const std::string& session_id,
                              const std::string& doc_id) const {
  std::lock_guard lock(mutex_);
  for (const auto& r : inputs_) {
    if (r.session_id == session_id && r.doc_id == doc_id) return true;
  }
  return false;
}

std::vector<Decision> SessionStore::decisions() const {
  std::lock_guard lock(mutex_);
  return decisions_;
}

std::vector<SurveyResponse> SessionStore::surveys() const {
  std::lock_guard lock(mutex_);
  return surveys_;
}

std::filesystem::path SessionStore::model_path(const std::string& session_id) const {
  return dir_ / "models" / (session_id + ".json");
}

}  // namespace selex

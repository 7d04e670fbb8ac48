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

#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selex/belief.hpp"
#include "selex/study.hpp"

namespace selex {

// Durable study state under one directory:
//   sessions.jsonl   session snapshots, latest line per id wins
//   inputs.jsonl     InputRecord log
//   decisions.jsonl  Decision log
//   surveys.jsonl    SurveyResponse log
//   models/          persisted belief models
// Every append is flushed and fsync'ed before returning. A torn final line
// (crash mid-write) is dropped on open; earlier lines are never rewritten.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  void put_session(const Session& s);
  std::optional<Session> get_session(const std::string& id) const;
  std::vector<Session> sessions() const;  // sorted by id
  std::size_t session_count() const;

  void append_inputs(std::span<const InputRecord> records);
  void append_decision(const Decision& d);
  void append_survey(const SurveyResponse& r);

  std::vector<InputRecord> inputs() const;
  std::vector<InputRecord> inputs_for(const std::string& session_id) const;
  bool has_inputs(const std::string& session_id, const std::string& doc_id) const;
  std::vector<Decision> decisions() const;
  std::vector<SurveyResponse> surveys() const;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path model_path(const std::string& session_id) const;

 private:
  struct Log {
    std::filesystem::path path;
    int fd = -1;
  };

  void open_log(Log& log, const char* name);
  void append_line(Log& log, const std::string& line);
  std::vector<std::string> replay(const Log& log) const;

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  Log sessions_log_;
  Log inputs_log_;
  Log decisions_log_;
  Log surveys_log_;
  std::map<std::string, Session> sessions_;
  std::vector<InputRecord> inputs_;
  std::vector<Decision> decisions_;
  std::vector<SurveyResponse> surveys_;
};

}  // namespace selex

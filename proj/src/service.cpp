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

#include "selex/service.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <httplib.h>

#include "selex/error.hpp"
#include "selex/log.hpp"
#include "selex/random.hpp"

namespace selex {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

json lime_to_json(const LimeParams& p) {
  return {{"n_samples", p.n_samples},
          {"kernel_width", p.kernel_width},
          {"ridge_strength", p.ridge_strength},
          {"keep_probability", p.keep_probability},
          {"seed", p.seed}};
}

}  // namespace

json StudyConfig::to_json() const {
  json roster_json = json::array();
  for (const auto& r : roster) {
    roster_json.push_back({{"condition", condition_name(r.condition.name)},
                           {"sampling", sampling_name(r.condition.sampling)},
                           {"weight", r.weight}});
  }
  return {
      {"corpus",
       {{"path", corpus_path.string()},
        {"format", corpus_format == CorpusFormat::kJsonl ? "jsonl" : "csv"}}},
      {"splits",
       {{"sizes", {split_sizes.train, split_sizes.dev, split_sizes.test}},
        {"seed", split_seed},
        {"dir", splits_dir.string()}}},
      {"classifier", {{"model", model}, {"reg_strength", classifier_reg}}},
      {"explanations",
       {{"dev", dev_cache.string()},
        {"test", test_cache.string()},
        {"lime", lime_to_json(lime)}}},
      {"embeddings", embeddings_path.string()},
      {"panel_records", panel_records ? json(panel_records->string()) : json()},
      {"roster", roster_json},
      {"seeds", {{"global", global_seed}, {"fixed_sample", fixed_sample_seed}}},
      {"belief",
       {{"reg_strength", belief_reg},
        {"threshold", belief_threshold},
        {"gray_unknown", gray_unknown}}},
      {"store_dir", store_dir.string()},
      {"export_dir", export_dir.string()},
      {"server", {{"host", host}, {"port", port}}},
  };
}

StudyConfig StudyConfig::from_json(const json& j, const fs::path& base_dir) {
  StudyConfig c;
  try {
    if (j.contains("corpus")) {
      const auto& corpus = j.at("corpus");
      c.corpus_path = resolve(base_dir, corpus.at("path").get<std::string>());
      auto fmt = parse_corpus_format(corpus.value("format", std::string("jsonl")));
      if (!fmt) throw InvalidArgument("config: unknown corpus format");
      c.corpus_format = *fmt;
    }
    if (j.contains("splits")) {
      const auto& s = j.at("splits");
      if (s.contains("sizes")) {
        const auto sizes = s.at("sizes").get<std::vector<std::size_t>>();
        if (sizes.size() != 3) throw InvalidArgument("config: splits.sizes needs 3 values");
        c.split_sizes = {sizes[0], sizes[1], sizes[2]};
      }
      c.split_seed = s.value("seed", c.split_seed);
      c.splits_dir = resolve(base_dir, s.value("dir", c.splits_dir.string()));
    } else {
      c.splits_dir = resolve(base_dir, c.splits_dir);
    }
    if (j.contains("classifier")) {
      const auto& m = j.at("classifier");
      c.model = m.value("model", c.model);
      c.classifier_reg = m.value("reg_strength", c.classifier_reg);
    }
    if (!c.model.starts_with("http://") && !c.model.starts_with("https://")) {
      c.model = resolve(base_dir, c.model).string();
    }
    const json expl = j.value("explanations", json::object());
    c.dev_cache = resolve(base_dir, expl.value("dev", c.dev_cache.string()));
    c.test_cache = resolve(base_dir, expl.value("test", c.test_cache.string()));
    if (expl.contains("lime")) {
      const auto& l = expl.at("lime");
      c.lime.n_samples = l.value("n_samples", c.lime.n_samples);
      c.lime.kernel_width = l.value("kernel_width", c.lime.kernel_width);
      c.lime.ridge_strength = l.value("ridge_strength", c.lime.ridge_strength);
      c.lime.keep_probability = l.value("keep_probability", c.lime.keep_probability);
      c.lime.seed = l.value("seed", c.lime.seed);
    }
    if (j.contains("embeddings")) {
      c.embeddings_path = resolve(base_dir, j.at("embeddings").get<std::string>());
    }
    if (j.contains("panel_records") && !j.at("panel_records").is_null()) {
      c.panel_records = resolve(base_dir, j.at("panel_records").get<std::string>());
    }
    if (j.contains("roster")) {
      for (const auto& r : j.at("roster")) {
        auto name = parse_condition_name(r.at("condition").get<std::string>());
        auto sampling = parse_sampling(r.value("sampling", std::string("fixed")));
        if (!name || !sampling) throw InvalidArgument("config: bad roster entry " + r.dump());
        c.roster.push_back({{*name, *sampling}, r.value("weight", 1u)});
      }
    }
    if (j.contains("seeds")) {
      c.global_seed = j.at("seeds").value("global", c.global_seed);
      c.fixed_sample_seed = j.at("seeds").value("fixed_sample", c.fixed_sample_seed);
    }
    if (j.contains("belief")) {
      const auto& b = j.at("belief");
      c.belief_reg = b.value("reg_strength", c.belief_reg);
      c.belief_threshold = b.value("threshold", c.belief_threshold);
      c.gray_unknown = b.value("gray_unknown", c.gray_unknown);
    }
    c.store_dir = resolve(base_dir, j.value("store_dir", c.store_dir.string()));
    c.export_dir = resolve(base_dir, j.value("export_dir", c.export_dir.string()));
    if (j.contains("server")) {
      c.host = j.at("server").value("host", c.host);
      c.port = j.at("server").value("port", c.port);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (c.roster.empty()) {
    for (auto name : {ConditionName::kControl, ConditionName::kOpenEnded,
                      ConditionName::kCritique}) {
      c.roster.push_back({{name, Sampling::kFixed}, 1});
    }
  }
  return c;
}

StudyConfig StudyConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::string StudyConfig::hash() const {
  json j = to_json();
  // Operational settings do not change what a row means.
  j.erase("store_dir");
  j.erase("export_dir");
  j.erase("server");
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return out.str();
}

void apply_seed_override(StudyConfig& config) {
  if (const char* env = std::getenv("SELEX_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw InvalidArgument(std::string("SELEX_SEED is not an integer: ") + env);
    }
    config.global_seed = v;
  }
}

// ---------------------------------------------------------------------------
// Materials

std::vector<TaskItem> StudyMaterials::task_candidates() const {
  std::vector<TaskItem> out;
  out.reserve(task_items.size());
  for (const auto& [id, item] : task_items) out.push_back(item);
  return out;
}

std::vector<TokenizedReview> StudyMaterials::input_reviews() const {
  std::vector<TokenizedReview> out;
  for (const auto& id : input_sample.doc_ids) out.push_back(reviews.at(id));
  return out;
}

StudyMaterials StudyMaterials::load(const StudyConfig& config) {
  StudyMaterials m;
  const auto corpus = load_corpus(config.corpus_path, config.corpus_format);
  const Splits splits = load_split_manifest(config.splits_dir, corpus);
  m.dev_explanations = load_explanation_cache(config.dev_cache);
  m.test_explanations = load_explanation_cache(config.test_cache);
  m.embeddings = load_embeddings(config.embeddings_path);

  std::vector<Explanation> dev_pool;
  std::map<std::string, Label> truth;
  for (const auto& d : splits.dev) {
    auto it = m.dev_explanations.find(d.id);
    if (it == m.dev_explanations.end()) {
      throw LoadError("dev explanation cache lacks '" + d.id + "'");
    }
    dev_pool.push_back(it->second);
    truth[d.id] = d.label;
    m.reviews.emplace(d.id, tokenize_document(d));
  }
  for (const auto& d : splits.test) {
    auto it = m.test_explanations.find(d.id);
    if (it == m.test_explanations.end()) {
      throw LoadError("test explanation cache lacks '" + d.id + "'");
    }
    m.task_items[d.id] = {d.id, d.label, it->second.prediction.label};
    m.reviews.emplace(d.id, tokenize_document(d));
  }
  m.input_sample = sample_input_reviews(dev_pool, truth);
  if (config.panel_records) {
    const auto records = load_records(*config.panel_records);
    m.panel_model = train_panel_model(m, records, derive_seed(config.global_seed, "panel"),
                                      config.belief_reg, config.belief_threshold);
  }
  return m;
}

BeliefModel train_panel_model(const StudyMaterials& materials,
                              std::span<const InputRecord> panel_records,
                              std::uint64_t seed, double reg_strength,
                              double threshold) {
  const auto aggregated = aggregate_panel(panel_records);
  std::vector<TokenizedReview> reviews;
  std::set<std::string> ids;
  for (const auto& r : aggregated) ids.insert(r.doc_id);
  for (const auto& id : ids) {
    auto it = materials.reviews.find(id);
    if (it == materials.reviews.end()) {
      throw InvalidArgument("panel records mention unknown review '" + id + "'");
    }
    reviews.push_back(it->second);
  }
  const auto ts = build_training_set(aggregated, reviews, materials.embeddings, seed);
  return train_belief(ts, reg_strength, threshold);
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// ---------------------------------------------------------------------------
// Server

StudyServer::StudyServer(StudyConfig config,
                         std::shared_ptr<const StudyMaterials> materials,
                         std::shared_ptr<SessionStore> store, Clock clock)
    : config_(std::move(config)),
      config_hash_(config_.hash()),
      materials_(std::move(materials)),
      store_(std::move(store)),
      clock_(std::move(clock)) {
  for (const auto& entry : config_.roster) {
    for (unsigned i = 0; i < entry.weight; ++i) roster_slots_.push_back(entry.condition);
  }
  if (roster_slots_.empty()) throw InvalidArgument("study roster is empty");
  created_ = store_->session_count();
  reconcile();
}

StudyServer::~StudyServer() {
  std::map<std::string, std::shared_future<void>> jobs;
  {
    std::lock_guard lock(registry_mutex_);
    jobs = training_jobs_;
  }
  for (auto& [id, job] : jobs) job.wait();
}

std::mutex& StudyServer::session_mutex(const std::string& id) {
  std::lock_guard lock(registry_mutex_);
  auto& m = session_mutexes_[id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

Session StudyServer::load_session(const std::string& id) const {
  auto s = store_->get_session(id);
  if (!s) throw ProtocolError("not_found", "no session '" + id + "'");
  return *s;
}

Session StudyServer::session(const std::string& session_id) const {
  return load_session(session_id);
}

void StudyServer::reconcile() {
  // Replays log entries whose session snapshot did not make it to disk.
  const auto decisions = store_->decisions();
  for (Session s : store_->sessions()) {
    bool changed = false;
    if (s.phase == Phase::kInput && !s.training) {
      while (auto current = s.current_item()) {
        std::size_t stored = 0;
        for (const auto& r : store_->inputs_for(s.session_id)) stored += r.doc_id == *current;
        const bool complete =
            s.condition.elicitation() == Elicitation::kCritique
                ? stored == materials_->dev_explanations.at(*current).attributions.size()
                : stored > 0;
        if (!complete) break;
        if (complete_input_item(s, *current, clock_())) break;
        changed = true;
      }
      changed = changed || s.training;
    }
    for (const auto& d : decisions) {
      if (d.session_id != s.session_id || s.decided(d.doc_id)) continue;
      if (s.phase != Phase::kTask) break;
      record_decision(s, materials_->task_items, d.doc_id, d.human_label, d.elapsed_ms,
                      clock_());
      changed = true;
    }
    if (changed) store_->put_session(s);
    if (s.phase == Phase::kInput && s.training) start_training(s);
  }
}

Session StudyServer::create_session(const std::optional<std::string>& condition,
                                    const std::optional<std::string>& sampling) {
  Condition cond;
  std::string id;
  {
    std::lock_guard lock(registry_mutex_);
    if (condition) {
      auto name = parse_condition_name(*condition);
      if (!name) {
        throw ProtocolError("unknown_condition", "unknown condition '" + *condition + "'");
      }
      std::optional<Sampling> wanted;
      if (sampling) {
        wanted = parse_sampling(*sampling);
        if (!wanted) {
          throw ProtocolError("unknown_condition", "unknown sampling '" + *sampling + "'");
        }
      }
      cond = {*name, wanted.value_or(Sampling::kFixed)};
      for (const auto& slot : roster_slots_) {
        if (slot.name == *name && (!wanted || slot.sampling == *wanted)) {
          cond = slot;
          break;
        }
      }
    } else {
      cond = roster_slots_[created_ % roster_slots_.size()];
    }
    ++created_;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%05zu", created_);
    id = buf;
  }
  if (cond.input_source() == InputSource::kPanel && !materials_->panel_model) {
    throw ProtocolError("unknown_condition",
                        "condition panel_selective needs configured panel records");
  }
  Session s;
  s.session_id = id;
  s.condition = cond;
  s.seed = derive_seed(config_.global_seed, id);
  if (s.has_input_phase()) s.input_review_ids = materials_->input_sample.doc_ids;
  s.task_review_ids = sample_task_reviews(materials_->task_candidates(), cond.sampling,
                                          config_.fixed_sample_seed, s.seed);
  s.clock["consent"] = clock_();
  std::lock_guard lock(session_mutex(id));
  store_->put_session(s);
  return s;
}

Session StudyServer::consent(const std::string& session_id) {
  std::lock_guard lock(session_mutex(session_id));
  Session s = load_session(session_id);
  begin_session(s, clock_());
  store_->put_session(s);
  return s;
}

std::shared_ptr<const BeliefModel> StudyServer::session_model(const Session& s) const {
  switch (s.condition.input_source()) {
    case InputSource::kNone:
      return nullptr;
    case InputSource::kPanel:
      return std::shared_ptr<const BeliefModel>(materials_, &*materials_->panel_model);
    case InputSource::kSelf:
      break;
  }
  if (!s.belief_model_ref) return nullptr;
  std::lock_guard lock(registry_mutex_);
  auto& cached = model_cache_[s.session_id];
  if (!cached) {
    cached = std::make_shared<const BeliefModel>(BeliefModel::load(*s.belief_model_ref));
  }
  return cached;
}

SelectiveExplanation StudyServer::task_rendering(const Session& s,
                                                 const std::string& doc_id) const {
  auto expl = materials_->test_explanations.find(doc_id);
  auto review = materials_->reviews.find(doc_id);
  if (expl == materials_->test_explanations.end() || review == materials_->reviews.end()) {
    throw ProtocolError("unknown_doc", "no cached explanation for '" + doc_id + "'");
  }
  const auto model = session_model(s);
  RenderOptions options;
  options.gray_unknown = config_.gray_unknown;
  return render_states(expl->second, review->second, model.get(),
                       materials_->embeddings, options);
}

namespace {

json keyword_list(const Explanation& e) {
  json out = json::array();
  for (const auto& a : e.attributions) {
    out.push_back({{"word", a.word},
                   {"weight", a.weight},
                   {"direction", a.weight >= 0 ? "positive" : "negative"}});
  }
  return out;
}

}  // namespace

json StudyServer::serve_next_item(const std::string& session_id) {
  std::lock_guard lock(session_mutex(session_id));
  Session s = load_session(session_id);
  if (s.phase == Phase::kInput && s.training) {
    throw ProtocolError("training_in_progress",
                        "belief model for session '" + session_id + "' is still training");
  }
  if (s.phase != Phase::kInput && s.phase != Phase::kTask) {
    throw ProtocolError("wrong_phase", "no items to serve in phase '" +
                                           std::string(phase_name(s.phase)) + "'");
  }
  const auto item = s.current_item();
  if (!item) throw ProtocolError("wrong_phase", "phase has no remaining items");
  if (!s.served_at.contains(*item)) {
    s.served_at[*item] = clock_();
    store_->put_session(s);
  }
  const TokenizedReview& review = materials_->reviews.at(*item);

  json payload;
  payload["session_id"] = s.session_id;
  payload["condition"] = condition_name(s.condition.name);
  payload["phase"] = phase_name(s.phase);
  json body = {{"doc_id", *item}, {"text", review.doc.text}};
  if (s.phase == Phase::kInput) {
    const Explanation& expl = materials_->dev_explanations.at(*item);
    payload["progress"] = {{"index", s.inputs_done}, {"total", s.input_review_ids.size()}};
    if (s.condition.elicitation() == Elicitation::kCritique) {
      body["elicitation"] = "critique";
      body["keywords"] = keyword_list(expl);
      body["rendering"] = rendering_to_json(
          render_states(expl, review, nullptr, materials_->embeddings), review);
    } else {
      SelectiveExplanation plain;
      plain.doc_id = *item;
      plain.states.assign(review.tokens.size(), DisplayState::plain());
      body["elicitation"] = "open_ended";
      body["rendering"] = rendering_to_json(plain, review);
    }
  } else {
    const Explanation& expl = materials_->test_explanations.at(*item);
    payload["progress"] = {{"index", s.decided_ids.size()},
                           {"total", s.task_review_ids.size()}};
    body["prediction"] = {{"label", label_name(expl.prediction.label)},
                          {"prob_positive", expl.prediction.prob_positive}};
    body["rendering"] = rendering_to_json(task_rendering(s, *item), review);
  }
  payload["item"] = std::move(body);
  return payload;
}

Session StudyServer::submit_input(
    const std::string& session_id, const std::string& doc_id,
    const std::vector<std::pair<std::string, std::string>>& words) {
  std::lock_guard lock(session_mutex(session_id));
  Session s = load_session(session_id);
  if (s.phase != Phase::kInput || s.training) {
    throw ProtocolError("wrong_phase", "input is not accepted in phase '" +
                                           std::string(phase_name(s.phase)) +
                                           (s.training ? "' (training)" : "'"));
  }
  const auto current = s.current_item();
  if (!current || *current != doc_id) {
    throw ProtocolError("unknown_doc",
                        "'" + doc_id + "' is not the current input review");
  }
  const Elicitation elicitation = *s.condition.elicitation();
  const TokenizedReview& review = materials_->reviews.at(doc_id);
  const Explanation& expl = materials_->dev_explanations.at(doc_id);
  const auto review_words = review.unique_words();
  const std::int64_t now = clock_();

  std::vector<InputRecord> records;
  std::set<std::string> seen;
  for (const auto& [raw_word, raw_signal] : words) {
    const std::string word = casefold(raw_word);
    auto signal = parse_signal(raw_signal);
    if (!signal) throw ProtocolError("invalid_input", "unknown signal '" + raw_signal + "'");
    InputRecord r{session_id, doc_id, word, *signal, elicitation, now};
    try {
      validate_record(r, &expl);
    } catch (const Error& e) {
      throw ProtocolError("invalid_input", e.what());
    }
    if (elicitation == Elicitation::kOpenEnded &&
        std::find(review_words.begin(), review_words.end(), word) == review_words.end()) {
      throw ProtocolError("invalid_input", "'" + word + "' does not occur in the review");
    }
    if (!seen.insert(word).second) {
      if (elicitation == Elicitation::kCritique) {
        throw ProtocolError("invalid_input", "keyword '" + word + "' answered twice");
      }
      continue;
    }
    records.push_back(std::move(r));
  }
  if (elicitation == Elicitation::kCritique && records.size() != expl.attributions.size()) {
    throw ProtocolError("invalid_input", "every keyword needs an agree/disagree answer (" +
                                             std::to_string(records.size()) + " of " +
                                             std::to_string(expl.attributions.size()) + ")");
  }
  // A retry after a partial write appends only what is missing.
  std::set<std::string> stored;
  for (const auto& r : store_->inputs_for(session_id)) {
    if (r.doc_id == doc_id) stored.insert(r.word);
  }
  std::erase_if(records, [&](const InputRecord& r) { return stored.contains(r.word); });
  store_->append_inputs(records);
  const bool finished = complete_input_item(s, doc_id, now);
  store_->put_session(s);
  if (finished) start_training(s);
  return s;
}

void StudyServer::start_training(const Session& s) {
  std::lock_guard lock(registry_mutex_);
  training_jobs_[s.session_id] =
      std::async(std::launch::async, &StudyServer::train_session, this, s.session_id)
          .share();
}

void StudyServer::train_session(std::string session_id) {
  std::optional<std::string> model_ref;
  std::optional<std::string> error;
  std::uint64_t seed = 0;
  {
    std::lock_guard lock(session_mutex(session_id));
    seed = load_session(session_id).seed;
  }
  try {
    const auto records = store_->inputs_for(session_id);
    const auto reviews = materials_->input_reviews();
    const auto ts = build_training_set(records, reviews, materials_->embeddings, seed);
    const BeliefModel model = train_belief(ts, config_.belief_reg, config_.belief_threshold);
    const auto path = store_->model_path(session_id);
    model.save(path);
    model_ref = path.string();
  } catch (const std::exception& e) {
    // The session continues with the original explanations.
    warn("belief training for session '" + session_id + "' failed: " + e.what());
    error = e.what();
  }
  std::lock_guard lock(session_mutex(session_id));
  Session s = load_session(session_id);
  finish_training(s, model_ref, error, clock_());
  store_->put_session(s);
}

void StudyServer::wait_for_training(const std::string& session_id) {
  std::shared_future<void> job;
  {
    std::lock_guard lock(registry_mutex_);
    auto it = training_jobs_.find(session_id);
    if (it == training_jobs_.end()) return;
    job = it->second;
  }
  job.get();
}

Session StudyServer::submit_decision(const std::string& session_id,
                                     const std::string& doc_id, Label human_label) {
  std::lock_guard lock(session_mutex(session_id));
  Session s = load_session(session_id);
  const std::int64_t now = clock_();
  auto served = s.served_at.find(doc_id);
  const std::int64_t elapsed = served == s.served_at.end() ? 0 : now - served->second;
  const Decision d =
      record_decision(s, materials_->task_items, doc_id, human_label, elapsed, now);
  store_->append_decision(d);
  store_->put_session(s);
  return s;
}

Session StudyServer::submit_survey(const std::string& session_id, SurveyResponse response) {
  std::lock_guard lock(session_mutex(session_id));
  Session s = load_session(session_id);
  if (s.phase != Phase::kSurvey) {
    throw ProtocolError("wrong_phase", "survey is not accepted in phase '" +
                                           std::string(phase_name(s.phase)) + "'");
  }
  response.session_id = session_id;
  try {
    validate_survey(response);
  } catch (const Error& e) {
    throw ProtocolError("invalid_input", e.what());
  }
  store_->append_survey(response);
  record_survey(s, clock_());
  store_->put_session(s);
  return s;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) row.push_back(',');
    row += csv_field(fields[i]);
  }
  row.push_back('\n');
  return row;
}

std::optional<std::int64_t> phase_duration(const Session& s, const char* from,
                                           const char* to) {
  auto a = s.clock.find(from);
  auto b = s.clock.find(to);
  if (a == s.clock.end() || b == s.clock.end()) return std::nullopt;
  return b->second - a->second;
}

}  // namespace

ExportResult StudyServer::export_results(const fs::path& out_dir) const {
  const auto sessions = store_->sessions();
  const auto decisions = store_->decisions();
  const auto surveys = store_->surveys();
  const auto inputs = store_->inputs();

  std::map<std::string, const Session*> by_id;
  for (const auto& s : sessions) by_id[s.session_id] = &s;

  std::string decisions_csv =
      csv_row({"session_id", "condition", "sampling", "doc_id", "ai_label",
               "human_label", "groundtruth", "elapsed_ms", "config_hash"});
  std::map<std::string, std::vector<Decision>> per_session;
  std::map<std::string, std::vector<Decision>> per_condition;
  std::vector<Decision> all;
  for (const auto& s : sessions) {
    for (const auto& d : decisions) {
      if (d.session_id != s.session_id) continue;
      decisions_csv += csv_row({d.session_id, std::string(condition_name(s.condition.name)),
                                std::string(sampling_name(s.condition.sampling)), d.doc_id,
                                std::string(label_name(d.ai_label)),
                                std::string(label_name(d.human_label)),
                                std::string(label_name(d.groundtruth)),
                                std::to_string(d.elapsed_ms), config_hash_});
      per_session[s.session_id].push_back(d);
      per_condition[std::string(condition_name(s.condition.name)) + "/" +
                    std::string(sampling_name(s.condition.sampling))]
          .push_back(d);
      all.push_back(d);
    }
  }

  std::vector<std::string> survey_header = {"session_id", "condition", "sampling"};
  for (const auto& item : survey_items()) survey_header.push_back(item.key);
  survey_header.push_back("demographics");
  survey_header.push_back("config_hash");
  std::string surveys_csv = csv_row(survey_header);
  std::vector<const SurveyResponse*> sorted_surveys;
  for (const auto& r : surveys) sorted_surveys.push_back(&r);
  std::stable_sort(sorted_surveys.begin(), sorted_surveys.end(),
                   [](const SurveyResponse* a, const SurveyResponse* b) {
                     return a->session_id < b->session_id;
                   });
  for (const auto* r : sorted_surveys) {
    auto it = by_id.find(r->session_id);
    std::vector<std::string> row = {r->session_id};
    row.push_back(it == by_id.end() ? "" : std::string(condition_name(it->second->condition.name)));
    row.push_back(it == by_id.end() ? "" : std::string(sampling_name(it->second->condition.sampling)));
    for (const auto& item : survey_items()) {
      auto rating = r->ratings.find(item.key);
      row.push_back(rating == r->ratings.end() ? "" : std::to_string(rating->second));
    }
    row.push_back(json(r->demographics).dump());
    row.push_back(config_hash_);
    surveys_csv += csv_row(row);
  }

  std::string inputs_jsonl;
  for (const auto& s : sessions) {
    for (const auto& r : inputs) {
      if (r.session_id == s.session_id) inputs_jsonl += record_to_json_line(r) + "\n";
    }
  }

  json metrics;
  metrics["config_hash"] = config_hash_;
  metrics["overall"] = all.empty() ? json() : metrics_to_json(compute_metrics(all));
  metrics["by_condition"] = json::object();
  for (const auto& [key, ds] : per_condition) {
    metrics["by_condition"][key] = metrics_to_json(compute_metrics(ds));
  }
  metrics["sessions"] = json::object();
  for (const auto& s : sessions) {
    json entry = {{"condition", condition_name(s.condition.name)},
                  {"sampling", sampling_name(s.condition.sampling)},
                  {"phase", phase_name(s.phase)},
                  {"belief_model", s.belief_model_ref ? json(fs::path(*s.belief_model_ref).filename().string()) : json()},
                  {"training_error", s.training_error ? json(*s.training_error) : json()}};
    auto it = per_session.find(s.session_id);
    entry["metrics"] = it == per_session.end() ? json() : metrics_to_json(compute_metrics(it->second));
    auto input_ms = phase_duration(s, "input", "training");
    auto task_ms = phase_duration(s, "task", "survey");
    entry["phase_ms"] = {{"input", input_ms ? json(*input_ms) : json()},
                         {"task", task_ms ? json(*task_ms) : json()}};
    metrics["sessions"][s.session_id] = std::move(entry);
  }

  const std::vector<std::pair<std::string, std::string>> files = {
      {"decisions.csv", decisions_csv},
      {"surveys.csv", surveys_csv},
      {"inputs.jsonl", inputs_jsonl},
      {"metrics.json", metrics.dump(2) + "\n"},
  };
  ExportResult result;
  result.metrics = metrics;
  std::vector<fs::path> staged;
  try {
    fs::create_directories(out_dir);
    for (const auto& [name, content] : files) {
      const fs::path tmp = out_dir / ("." + name + ".tmp");
      staged.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw IoError("cannot write " + tmp.string());
      out << content;
      out.close();
      if (!out) throw IoError("write failed for " + tmp.string());
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      const fs::path target = out_dir / files[i].first;
      fs::rename(staged[i], target);
      result.files.push_back(target);
    }
  } catch (const std::exception& e) {
    std::error_code ec;
    for (const auto& p : staged) fs::remove(p, ec);
    if (dynamic_cast<const IoError*>(&e)) throw;
    throw IoError(std::string("export failed: ") + e.what());
  }
  return result;
}

// ---------------------------------------------------------------------------
// HTTP

int http_status_for(const std::string& code) {
  if (code == "wrong_phase" || code == "duplicate") return 409;
  if (code == "training_in_progress") return 503;
  if (code == "not_found" || code == "unknown_doc") return 404;
  if (code == "unknown_condition" || code == "invalid_input" ||
      code == "invalid_argument" || code == "insufficient_input") {
    return 400;
  }
  return 500;
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    reply(res, http_status_for(e.code()), {{"error", e.code()}, {"message", e.what()}});
  } catch (const json::exception& e) {
    reply(res, 400, {{"error", "invalid_input"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"error", "internal"}, {"message", e.what()}});
  }
}

json session_summary(const Session& s) {
  return {{"session_id", s.session_id},
          {"condition", condition_name(s.condition.name)},
          {"sampling", sampling_name(s.condition.sampling)},
          {"phase", phase_name(s.phase)},
          {"training", s.training}};
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

}  // namespace

void register_routes(httplib::Server& http, StudyServer& server) {
  http.Post("/sessions", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      std::optional<std::string> condition;
      std::optional<std::string> sampling;
      if (body.contains("condition") && !body["condition"].is_null()) {
        condition = body["condition"].get<std::string>();
      }
      if (body.contains("sampling") && !body["sampling"].is_null()) {
        sampling = body["sampling"].get<std::string>();
      }
      reply(res, 201, session_summary(server.create_session(condition, sampling)));
    });
  });
  http.Post(R"(/sessions/([^/]+)/consent)",
            [&](const httplib::Request& req, httplib::Response& res) {
              guarded(res, [&] {
                reply(res, 200, session_summary(server.consent(req.matches[1])));
              });
            });
  http.Get(R"(/sessions/([^/]+)/next)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, server.serve_next_item(req.matches[1])); });
  });
  http.Get(R"(/sessions/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, session_summary(server.session(req.matches[1]))); });
  });
  http.Post(R"(/sessions/([^/]+)/input)",
            [&](const httplib::Request& req, httplib::Response& res) {
              guarded(res, [&] {
                const json body = parse_body(req);
                std::vector<std::pair<std::string, std::string>> words;
                for (const auto& r : body.at("records")) {
                  words.emplace_back(r.at("word").get<std::string>(),
                                     r.at("signal").get<std::string>());
                }
                const Session s = server.submit_input(
                    req.matches[1], body.at("doc_id").get<std::string>(), words);
                reply(res, 200, session_summary(s));
              });
            });
  http.Post(R"(/sessions/([^/]+)/decision)",
            [&](const httplib::Request& req, httplib::Response& res) {
              guarded(res, [&] {
                const json body = parse_body(req);
                auto label = parse_label(body.at("label").get<std::string>());
                if (!label) throw ProtocolError("invalid_input", "unknown label");
                const Session s = server.submit_decision(
                    req.matches[1], body.at("doc_id").get<std::string>(), *label);
                reply(res, 200, session_summary(s));
              });
            });
  http.Post(R"(/sessions/([^/]+)/survey)",
            [&](const httplib::Request& req, httplib::Response& res) {
              guarded(res, [&] {
                SurveyResponse r = survey_from_json(parse_body(req));
                reply(res, 200, session_summary(server.submit_survey(req.matches[1], r)));
              });
            });
  http.Get("/survey/schema", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, survey_schema());
  });
  http.Get("/export", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      const auto result = server.export_results(server.config().export_dir);
      json files = json::array();
      for (const auto& f : result.files) files.push_back(f.filename().string());
      reply(res, 200, {{"files", files}, {"metrics", result.metrics}});
    });
  });
}

// ---------------------------------------------------------------------------
// Simulation

std::vector<InputRecord> simulate_panel(const StudyMaterials& materials,
                                        const OracleAnnotator& oracle,
                                        std::size_t panel_size) {
  const auto reviews = materials.input_reviews();
  std::vector<InputRecord> records;
  for (std::size_t i = 0; i < panel_size; ++i) {
    const std::string member = "annotator-" + std::to_string(i + 1);
    auto part = simulate_input(oracle, reviews, materials.dev_explanations,
                               Elicitation::kCritique, member);
    records.insert(records.end(), part.begin(), part.end());
  }
  return records;
}

std::vector<std::string> run_simulation(StudyServer& server,
                                        const SimulationOptions& options) {
  const StudyMaterials& m = server.materials();
  std::vector<std::string> ids;
  for (const auto& cond : options.conditions) {
    for (std::size_t k = 0; k < options.sessions_per_condition; ++k) {
      Session s = server.create_session(std::string(condition_name(cond.name)),
                                        std::string(sampling_name(cond.sampling)));
      const std::string id = s.session_id;
      ids.push_back(id);
      s = server.consent(id);
      while (s.phase == Phase::kInput && !s.training) {
        const json payload = server.serve_next_item(id);
        const std::string doc = payload["item"]["doc_id"].get<std::string>();
        OracleAnnotator annotator = options.oracle;
        annotator.seed = derive_seed(options.oracle.seed, doc);
        const TokenizedReview& review = m.reviews.at(doc);
        const auto records =
            simulate_input(annotator, std::span<const TokenizedReview>(&review, 1),
                           m.dev_explanations, *s.condition.elicitation(), id);
        std::vector<std::pair<std::string, std::string>> words;
        for (const auto& r : records) words.emplace_back(r.word, std::string(signal_name(r.signal)));
        s = server.submit_input(id, doc, words);
      }
      server.wait_for_training(id);
      s = server.session(id);
      while (s.phase == Phase::kTask) {
        const json payload = server.serve_next_item(id);
        const std::string doc = payload["item"]["doc_id"].get<std::string>();
        const auto rendering = server.task_rendering(s, doc);
        const Label ai = m.task_items.at(doc).ai_label;
        s = server.submit_decision(id, doc,
                                   oracle_decision(options.oracle, m.reviews.at(doc), rendering, ai));
      }
      SurveyResponse survey;
      Rng rng(derive_seed(options.oracle.seed, "survey:" + id));
      for (const auto& item : survey_items()) {
        survey.ratings[item.key] = 1 + static_cast<int>(rng.uniform_index(5));
      }
      survey.demographics["source"] = "simulated";
      server.submit_survey(id, survey);
    }
  }
  return ids;
}

}  // namespace selex

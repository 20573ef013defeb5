// Copyright 2026 The structsum Authors. All Rights Reserved.
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

#include "structsum/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "structsum/digest.hpp"
#include "structsum/errors.hpp"

namespace structsum {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": cannot parse '" + v + "' as a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<LayerKind> parse_plan(const std::string& v) {
  std::vector<LayerKind> plan;
  if (v.empty() || v == "default") return plan;
  std::istringstream in(v);
  for (std::string item; std::getline(in, item, ',');) plan.push_back(parse_layer_kind(trim(item)));
  return plan;
}

std::string plan_string(const std::vector<LayerKind>& plan) {
  std::string s;
  for (std::size_t i = 0; i < plan.size(); ++i) s += (i ? "," : "") + to_string(plan[i]);
  return s.empty() ? "default" : s;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"d_model", [](RunConfig& c, auto& k, auto& v) { c.model.d_model = parse_number<int>(k, v); }},
      {"n_heads", [](RunConfig& c, auto& k, auto& v) { c.model.n_heads = parse_number<int>(k, v); }},
      {"n_script_modules", [](RunConfig& c, auto& k, auto& v) { c.model.n_script_modules = parse_number<int>(k, v); }},
      {"n_decoder_layers", [](RunConfig& c, auto& k, auto& v) { c.model.n_decoder_layers = parse_number<int>(k, v); }},
      {"ffn_dim", [](RunConfig& c, auto& k, auto& v) { c.model.ffn_dim = parse_number<int>(k, v); }},
      {"dropout_p", [](RunConfig& c, auto& k, auto& v) { c.model.dropout_p = parse_number<double>(k, v); }},
      {"l", [](RunConfig& c, auto& k, auto& v) { c.model.l = parse_number<int>(k, v); }},
      {"k", [](RunConfig& c, auto& k, auto& v) { c.model.k = parse_number<int>(k, v); }},
      {"mask_mode", [](RunConfig& c, auto&, auto& v) { c.model.mask_mode = parse_mask_mode(v); }},
      {"layer_plan", [](RunConfig& c, auto&, auto& v) { c.model.layer_plan = parse_plan(v); }},
      {"srpe_placement", [](RunConfig& c, auto&, auto& v) { c.model.srpe_placement = parse_srpe_placement(v); }},
      {"label_smoothing", [](RunConfig& c, auto& k, auto& v) { c.model.label_smoothing = parse_number<double>(k, v); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = parse_number<std::size_t>(k, v); }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.train.lr = parse_number<double>(k, v); }},
      {"warmup_ratio", [](RunConfig& c, auto& k, auto& v) { c.train.warmup_ratio = parse_number<double>(k, v); }},
      {"weight_decay", [](RunConfig& c, auto& k, auto& v) { c.train.weight_decay = parse_number<double>(k, v); }},
      {"adam_beta1", [](RunConfig& c, auto& k, auto& v) { c.train.adam_beta1 = parse_number<double>(k, v); }},
      {"adam_beta2", [](RunConfig& c, auto& k, auto& v) { c.train.adam_beta2 = parse_number<double>(k, v); }},
      {"adam_eps", [](RunConfig& c, auto& k, auto& v) { c.train.adam_eps = parse_number<double>(k, v); }},
      {"max_epochs", [](RunConfig& c, auto& k, auto& v) { c.train.max_epochs = parse_number<std::size_t>(k, v); }},
      {"max_steps", [](RunConfig& c, auto& k, auto& v) { c.train.max_steps = parse_number<std::size_t>(k, v); }},
      {"early_stop_patience",
       [](RunConfig& c, auto& k, auto& v) { c.train.early_stop_patience = parse_number<std::size_t>(k, v); }},
      {"stop_metric", [](RunConfig& c, auto&, auto& v) { c.train.stop_metric = parse_stop_metric(v); }},
      {"track_bleu", [](RunConfig& c, auto& k, auto& v) { c.train.track_bleu = parse_bool(k, v); }},
      {"decode_max_len",
       [](RunConfig& c, auto& k, auto& v) { c.train.decode_max_len = parse_number<std::size_t>(k, v); }},
      {"sort_by_length", [](RunConfig& c, auto& k, auto& v) { c.train.sort_by_length = parse_bool(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.train.seed = parse_number<std::uint64_t>(k, v); }},
      {"deterministic", [](RunConfig& c, auto& k, auto& v) { c.train.deterministic = parse_bool(k, v); }},
      {"min_freq", [](RunConfig& c, auto& k, auto& v) { c.min_freq = parse_number<std::size_t>(k, v); }},
      {"max_vocab", [](RunConfig& c, auto& k, auto& v) { c.max_vocab = parse_number<std::size_t>(k, v); }},
      {"max_source_len", [](RunConfig& c, auto& k, auto& v) { c.max_source_len = parse_number<std::size_t>(k, v); }},
      {"max_target_len", [](RunConfig& c, auto& k, auto& v) { c.max_target_len = parse_number<std::size_t>(k, v); }},
      {"alpha", [](RunConfig& c, auto& k, auto& v) { c.weights.alpha = parse_number<double>(k, v); }},
      {"beta", [](RunConfig& c, auto& k, auto& v) { c.weights.beta = parse_number<double>(k, v); }},
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.weights.gamma = parse_number<double>(k, v); }},
      {"beam_size", [](RunConfig& c, auto& k, auto& v) { c.beam_size = parse_number<std::size_t>(k, v); }},
      {"length_penalty", [](RunConfig& c, auto& k, auto& v) { c.length_penalty = parse_number<double>(k, v); }},
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void RunConfig::apply(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (max_source_len == 0 || max_target_len == 0) throw ConfigError("length limits must be positive");
  if (beam_size == 0) throw ConfigError("beam_size must be positive");
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0 ||
      weights.alpha + weights.beta + weights.gamma <= 0)
    throw ConfigError("multi-view weights must be non-negative and not all zero");
}

DatasetOptions RunConfig::dataset_options() const {
  DatasetOptions o;
  o.encode.clip = model.l;
  o.encode.weights = weights;
  o.max_source_len = max_source_len;
  o.max_target_len = max_target_len;
  return o;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = model.to_json();
  j["layer_plan"] = plan_string(model.layer_plan);
  const nlohmann::json t = train.to_json();
  for (const auto& [k, v] : t.items()) j[k] = v;
  j["min_freq"] = min_freq;
  j["max_vocab"] = max_vocab;
  j["max_source_len"] = max_source_len;
  j["max_target_len"] = max_target_len;
  j["alpha"] = weights.alpha;
  j["beta"] = weights.beta;
  j["gamma"] = weights.gamma;
  j["beam_size"] = beam_size;
  j["length_penalty"] = length_penalty;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  for (const auto& [k, v] : j.items()) {
    if (setters().count(k) == 0) continue;
    if (v.is_string())
      c.set(k, v.get<std::string>());
    else
      c.set(k, v.dump());
  }
  return c;
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      base.apply(line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  try {
    return parse_run_config(read_file(path), std::move(base));
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_ablation(ModelConfig& cfg, const std::string& ablation) {
  if (ablation.empty() || ablation == "none" || ablation == "full") return;
  LayerKind drop;
  if (ablation == "no-rdw")
    drop = LayerKind::RDW;
  else if (ablation == "no-srpei")
    drop = LayerKind::SRPEi;
  else
    throw ConfigError("unknown ablation '" + ablation + "' (no-rdw, no-srpei)");
  std::vector<LayerKind> plan = cfg.effective_plan();
  for (auto& k : plan)
    if (k == drop) k = LayerKind::PLAIN;
  cfg.layer_plan = plan;
}

}  // namespace structsum

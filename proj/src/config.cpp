#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "erach/harness.hpp"

extern "C" char** environ;

namespace erach {

using nlohmann::json;

namespace {

// Pulls fields out of one JSON object level, tracking which keys were
// consumed so leftovers can be reported with their full path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError("config: expected an object at '" + path_ + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + join(key) + "': " + e.what());
    }
  }

  void get(const char* key, std::optional<double>& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    if (it->is_null()) {
      out.reset();
      return;
    }
    if (!it->is_number()) {
      throw ConfigError("config: bad value for '" + join(key) + "': expected number or null");
    }
    out = it->get<double>();
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* sub(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("config: unknown key '" + join(it.key()) + "'");
      }
    }
  }

  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

StateMask mask_from_components(const std::vector<std::string>& components,
                               const std::string& path) {
  StateMask m{false, false, false, false, false};
  for (const auto& c : components) {
    if (c == "time") m.time = true;
    else if (c == "positions") m.positions = true;
    else if (c == "throughput") m.throughput = true;
    else if (c == "collision") m.collision = true;
    else if (c == "prev_action") m.prev_action = true;
    else throw ConfigError("config: unknown state component '" + c + "' in '" + path + "'");
  }
  return m;
}

std::vector<std::string> components_from_mask(const StateMask& m) {
  std::vector<std::string> c;
  if (m.time) c.push_back("time");
  if (m.positions) c.push_back("positions");
  if (m.throughput) c.push_back("throughput");
  if (m.collision) c.push_back("collision");
  if (m.prev_action) c.push_back("prev_action");
  return c;
}

std::vector<StateMask> default_state_mask_sweep() {
  StateMask full;
  StateMask no_positions = full;
  no_positions.positions = false;
  StateMask no_collision = full;
  no_collision.collision = false;
  StateMask essentials{false, true, false, true, false};
  StateMask empty{false, false, false, false, false};
  return {full, no_positions, no_collision, essentials, empty};
}

void parse_constellation(const json& j, ConstellationConfig& c) {
  ObjectReader r(j, "constellation");
  r.get("planes", c.planes);
  r.get("sats_per_plane", c.sats_per_plane);
  r.get("altitude_m", c.altitude_m);
  r.get("orbit_radius_m", c.orbit_radius_m);
  r.get("circumference_m", c.circumference_m);
  r.get("speed_mps", c.speed_mps);
  r.get("inter_sat_distance_m", c.inter_sat_distance_m);
  r.get("period_s", c.period_s);
  r.get("grav_const", c.grav_const);
  r.get("earth_mass_kg", c.earth_mass_kg);
  r.get("position_noise_variance_m2", c.position_noise_variance_m2);
  r.get("cross_track_offset_m", c.cross_track_offset_m);
  r.get("initial_offset_m", c.initial_offset_m);
  r.finish();
}

void parse_link(const json& j, LinkBudget& l) {
  ObjectReader r(j, "link");
  r.get("bandwidth_hz", l.bandwidth_hz);
  r.get("pathloss_exponent", l.pathloss_exponent);
  r.get("los_l1", l.los_l1);
  r.get("los_l2", l.los_l2);
  r.get("nlos_attenuation", l.nlos_attenuation);
  r.get("ref_gain", l.ref_gain);
  r.get("tx_power_w", l.tx_power_w);
  r.get("noise_variance_w", l.noise_variance_w);
  std::string small_scale;
  r.get("small_scale", small_scale);
  if (!small_scale.empty()) {
    if (small_scale == "rayleigh") l.small_scale = LinkBudget::SmallScale::rayleigh;
    else if (small_scale == "none") l.small_scale = LinkBudget::SmallScale::none;
    else throw ConfigError("config: link.small_scale must be 'rayleigh' or 'none'");
  }
  r.finish();
}

void parse_timing(const json& j, SlotTiming& t) {
  ObjectReader r(j, "timing");
  r.get("signaling_s", t.signaling_s);
  r.get("data_s", t.data_s);
  r.get("base_slot_s", t.base_slot_s);
  r.finish();
}

void parse_reward(const json& j, RewardConfig& rc) {
  ObjectReader r(j, "reward");
  r.get("rho", rc.rho);
  r.get("mean_bits", rc.mean_bits);
  r.get("scale_bits", rc.scale_bits);
  std::string mode;
  r.get("mode", mode);
  if (!mode.empty()) {
    if (mode == "standard") rc.mode = RewardMode::standard;
    else if (mode == "rate_max") rc.mode = RewardMode::rate_max;
    else throw ConfigError("config: reward.mode must be 'standard' or 'rate_max'");
  }
  r.finish();
}

void parse_training(const json& j, TrainingConfig& t) {
  ObjectReader r(j, "training");
  r.get("gamma", t.gamma);
  r.get("entropy_coef", t.entropy_coef);
  r.get("value_coef", t.value_coef);
  r.get("episodes", t.episodes);
  r.get("steps_per_episode", t.steps_per_episode);
  r.get("learning_rate", t.optimizer.learning_rate);
  r.get("rmsprop_decay", t.optimizer.decay);
  r.get("rmsprop_epsilon", t.optimizer.epsilon);
  r.finish();
}

}  // namespace

long ExperimentConfig::episode_length() const {
  if (training.steps_per_episode > 0) return training.steps_per_episode;
  return timing.opportunities_per_pass(constellation.period_s,
                                       constellation.sats_per_plane);
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> kProtocols{"aloha", "rach", "erach",
                                                "erach-coop"};
  if (!kProtocols.count(protocol)) {
    throw ConfigError(
        "config: protocol must be one of aloha|rach|erach|erach-coop, got '" +
        protocol + "'");
  }
  if (ut_count < 1) throw ConfigError("config: ut_count must be >= 1");
  if (preambles < 1) throw ConfigError("config: preambles must be >= 1");
  if (replicas < 1) throw ConfigError("config: replicas must be >= 1");
  if (eval_episodes < 1) throw ConfigError("config: eval_episodes must be >= 1");
  if (backoff_window < 1) throw ConfigError("config: backoff_window must be >= 1");
  if (area_side_m <= 0) throw ConfigError("config: area_side_m must be > 0");
  if (ut_spacing_m && *ut_spacing_m <= 0) {
    throw ConfigError("config: ut_spacing_m must be > 0");
  }
  for (double s : sigma_sweep) {
    if (s < 0) throw ConfigError("config: sigma_sweep entries must be >= 0");
  }
  for (double rho : rho_sweep) {
    if (rho < 0) throw ConfigError("config: rho_sweep entries must be >= 0");
  }
  for (double d : density_sweep_m) {
    if (d <= 0) throw ConfigError("config: density_sweep_m entries must be > 0");
  }
  try {
    constellation.validate();
    link.validate();
    timing.validate();
    reward.validate();
    TrainingConfig materialized = training;
    materialized.steps_per_episode = episode_length();
    materialized.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.state_mask_sweep = default_state_mask_sweep();

  ObjectReader r(j, "");
  std::vector<std::string> missing;
  if (!r.has("protocol")) missing.push_back("protocol");
  if (!r.has("seed")) missing.push_back("seed");
  if (!missing.empty()) {
    std::string msg = "config: missing required key(s):";
    for (const auto& k : missing) msg += " '" + k + "'";
    throw ConfigError(msg);
  }

  r.get("protocol", cfg.protocol);
  r.get("seed", cfg.seed);
  r.get("replicas", cfg.replicas);
  r.get("eval_episodes", cfg.eval_episodes);
  r.get("ut_count", cfg.ut_count);
  r.get("area_side_m", cfg.area_side_m);
  r.get("ut_spacing_m", cfg.ut_spacing_m);
  r.get("preambles", cfg.preambles);
  r.get("backoff_window", cfg.backoff_window);
  r.get("greedy_eval", cfg.greedy_eval);
  r.get("per_subslot_fading", cfg.per_subslot_fading);

  if (const json* sub = r.sub("constellation")) parse_constellation(*sub, cfg.constellation);
  if (const json* sub = r.sub("link")) parse_link(*sub, cfg.link);
  if (const json* sub = r.sub("timing")) parse_timing(*sub, cfg.timing);
  if (const json* sub = r.sub("reward")) parse_reward(*sub, cfg.reward);
  if (const json* sub = r.sub("training")) parse_training(*sub, cfg.training);

  if (const json* sub = r.sub("state_components")) {
    std::vector<std::string> components = sub->get<std::vector<std::string>>();
    cfg.state_mask = mask_from_components(components, "state_components");
  }
  if (const json* sub = r.sub("state_mask_sweep")) {
    cfg.state_mask_sweep.clear();
    for (const auto& entry : *sub) {
      cfg.state_mask_sweep.push_back(mask_from_components(
          entry.get<std::vector<std::string>>(), "state_mask_sweep"));
    }
  }
  r.get("sigma_sweep", cfg.sigma_sweep);
  r.get("rho_sweep", cfg.rho_sweep);
  r.get("density_sweep_m", cfg.density_sweep_m);
  r.finish();

  // Cooperative runs use the cheap-talk reward; rho = 0 collapses the
  // standard reward to the rate-max objective either way.
  if (cfg.is_coop()) cfg.reward.mode = RewardMode::coop;

  cfg.validate();
  return cfg;
}

namespace {

void apply_env_override(json& j, const std::string& dotted_path,
                        const std::string& value) {
  json* at = &j;
  size_t pos = 0;
  std::string path = dotted_path;
  while (true) {
    const size_t sep = path.find("__", pos);
    const std::string key = path.substr(pos, sep == std::string::npos
                                                 ? std::string::npos
                                                 : sep - pos);
    if (sep == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*at)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    at = &(*at)[key];
    pos = sep + 2;
  }
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path,
                             bool apply_env_overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  const bool blank =
      std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });

  json j;
  if (blank) {
    j = json::object();
  } else {
    j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
      throw ConfigError("config: '" + path.string() + "' is not valid JSON");
    }
  }

  if (apply_env_overrides) {
    constexpr const char* kPrefix = "ERACH_";
    for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
      const std::string entry(*env);
      if (entry.rfind(kPrefix, 0) != 0) continue;
      const size_t eq = entry.find('=');
      if (eq == std::string::npos) continue;
      apply_env_override(j, entry.substr(std::strlen(kPrefix), eq - std::strlen(kPrefix)),
                         entry.substr(eq + 1));
    }
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["protocol"] = cfg.protocol;
  j["seed"] = cfg.seed;
  j["replicas"] = cfg.replicas;
  j["eval_episodes"] = cfg.eval_episodes;
  j["ut_count"] = cfg.ut_count;
  j["area_side_m"] = cfg.area_side_m;
  if (cfg.ut_spacing_m) j["ut_spacing_m"] = *cfg.ut_spacing_m;
  else j["ut_spacing_m"] = nullptr;
  j["preambles"] = cfg.preambles;
  j["backoff_window"] = cfg.backoff_window;
  j["greedy_eval"] = cfg.greedy_eval;
  j["per_subslot_fading"] = cfg.per_subslot_fading;

  const auto& c = cfg.constellation;
  j["constellation"] = {
      {"planes", c.planes},
      {"sats_per_plane", c.sats_per_plane},
      {"altitude_m", c.altitude_m},
      {"orbit_radius_m", c.orbit_radius_m},
      {"circumference_m", c.circumference_m},
      {"speed_mps", c.speed_mps},
      {"inter_sat_distance_m", c.inter_sat_distance_m},
      {"period_s", c.period_s},
      {"grav_const", c.grav_const},
      {"earth_mass_kg", c.earth_mass_kg},
      {"position_noise_variance_m2", c.position_noise_variance_m2},
      {"cross_track_offset_m", c.cross_track_offset_m},
      {"initial_offset_m", c.initial_offset_m},
  };
  const auto& l = cfg.link;
  j["link"] = {
      {"bandwidth_hz", l.bandwidth_hz},
      {"pathloss_exponent", l.pathloss_exponent},
      {"los_l1", l.los_l1},
      {"los_l2", l.los_l2},
      {"nlos_attenuation", l.nlos_attenuation},
      {"ref_gain", l.ref_gain},
      {"tx_power_w", l.tx_power_w},
      {"noise_variance_w", l.noise_variance_w},
      {"small_scale",
       l.small_scale == LinkBudget::SmallScale::rayleigh ? "rayleigh" : "none"},
  };
  j["timing"] = {
      {"signaling_s", cfg.timing.signaling_s},
      {"data_s", cfg.timing.data_s},
      {"base_slot_s", cfg.timing.base_slot_s},
  };
  const char* mode = cfg.reward.mode == RewardMode::standard ? "standard"
                     : cfg.reward.mode == RewardMode::rate_max ? "rate_max"
                                                               : "coop";
  j["reward"] = {
      {"rho", cfg.reward.rho},
      {"mean_bits", cfg.reward.mean_bits},
      {"scale_bits", cfg.reward.scale_bits},
      {"mode", mode},
  };
  j["training"] = {
      {"gamma", cfg.training.gamma},
      {"entropy_coef", cfg.training.entropy_coef},
      {"value_coef", cfg.training.value_coef},
      {"episodes", cfg.training.episodes},
      {"steps_per_episode", cfg.episode_length()},  // materialized
      {"learning_rate", cfg.training.optimizer.learning_rate},
      {"rmsprop_decay", cfg.training.optimizer.decay},
      {"rmsprop_epsilon", cfg.training.optimizer.epsilon},
  };
  j["state_components"] = components_from_mask(cfg.state_mask);
  json sweep = json::array();
  for (const auto& m : cfg.state_mask_sweep) sweep.push_back(components_from_mask(m));
  j["state_mask_sweep"] = sweep;
  j["sigma_sweep"] = cfg.sigma_sweep;
  j["rho_sweep"] = cfg.rho_sweep;
  j["density_sweep_m"] = cfg.density_sweep_m;
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string state_mask_label(const StateMask& mask) {
  const auto parts = components_from_mask(mask);
  if (parts.empty()) return "none";
  std::string label;
  for (const auto& p : parts) {
    if (!label.empty()) label += "+";
    label += p;
  }
  return label;
}

}  // namespace erach

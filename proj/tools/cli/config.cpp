#include "cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "keymotion/common.hpp"

namespace keymotion::cli {

namespace {

using Defaults = std::vector<std::pair<std::string, std::string>>;

const Defaults kTrain = {
    {"dataset", ""},          {"steps", "20000"},      {"batch", "32"},       {"learning_rate", "0.0003"},
    {"label_dropout", "0.1"}, {"width1", "64"},        {"width2", "128"},     {"diffusion_steps", "50"},
    {"beta_start", "0.0001"}, {"beta_end", "0.2"},     {"log_every", "50"},   {"init_seed", "0"},
};

const Defaults kSampling = {
    {"keyjoint_model", ""}, {"fullbody_model", ""}, {"guidance_weight", "2"},
    {"sampler", "ddpm"},    {"ddim_steps", "10"},   {"reimpute_x0", "true"},
};

const Defaults kMask = {
    {"joint_select", "cross"}, {"frame_select", "interval"}, {"interval", "30"},
    {"probability", "0.1"},    {"keep_ratio", "0.5"},
};

Defaults Join(std::initializer_list<const Defaults*> parts) {
  Defaults out;
  for (const Defaults* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

const std::map<std::string, Defaults, std::less<>>& Table() {
  static const auto* table = [] {
    auto* t = new std::map<std::string, Defaults, std::less<>>;
    (*t)["gen-data"] = {{"seed", "1"},         {"walk_count", "2000"}, {"reach_count", "300"}, {"climb_count", "300"},
                        {"sit_count", "300"},  {"frames", "60"},       {"export_text", "false"}};
    const Defaults seed = {{"seed", "0"}};
    const Defaults masks = {{"mask_cross_weight", "0.7"},  {"mask_single_weight", "0.15"},
                            {"mask_goal_weight", "0.15"},  {"mask_max_interval", "60"},
                            {"mask_min_probability", "0.02"}, {"mask_keep_ratio", "0.5"},
                            {"goal_only", "false"}};
    (*t)["train-keyjoint"] = Join({&seed, &kTrain, &masks});
    (*t)["train-fullbody"] = Join({&seed, &kTrain});
    const Defaults sample = {
        {"control", ""}, {"path", ""}, {"frames", "60"}, {"label", "none"}, {"body_scale", "1"}};
    (*t)["sample"] = Join({&seed, &kSampling, &sample});
    const Defaults goal = {{"goal", ""}, {"frames", "60"}};
    (*t)["goal"] = Join({&seed, &kSampling, &goal});
    const Defaults optimize = {{"keyjoint_model", ""},
                               {"fullbody_model", ""},
                               {"guidance_weight", "2"},
                               {"ddim_steps", "10"},
                               {"objective", "hand_to_head"},
                               {"path", ""},
                               {"window_begin", "-1"},
                               {"window_end", "-1"},
                               {"corridor_width", "0.4"},
                               {"corridor_axis", "0"},
                               {"corridor_center", "0"},
                               {"length_weight", "1"},
                               {"iterations", "200"},
                               {"learning_rate", "0.05"},
                               {"regularizer_weight", "0.01"},
                               {"frames", "60"},
                               {"label", "none"},
                               {"body_scale", "1"}};
    (*t)["optimize"] = Join({&seed, &optimize});
    const Defaults eval = {{"dataset", ""}, {"first", "0"}, {"count", "200"}, {"perturb", "0"}};
    (*t)["eval"] = Join({&seed, &kSampling, &kMask, &eval});
    const Defaults sweep = {{"dataset", ""},
                            {"first", "0"},
                            {"count", "50"},
                            {"perturb", "0"},
                            {"joint_selects", "cross,pelvis,right_wrist"},
                            {"frame_selects", "interval,probability"},
                            {"intervals", "1,30,60"},
                            {"probabilities", "0.01,0.1"},
                            {"keep_ratio", "0.5"},
                            {"seeds", "0"}};
    (*t)["sweep"] = Join({&kSampling, &sweep});
    (*t)["plot"] = {{"input", ""},
                    {"joints", "pelvis,head,left_hand,right_hand,left_foot,right_foot"},
                    {"path", ""},
                    {"width", "800"},
                    {"height", "800"},
                    {"title", ""}};
    return t;
  }();
  return *table;
}

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string>& CommandNames() {
  static const std::vector<std::string> names = {"gen-data", "train-keyjoint", "train-fullbody", "sample", "goal",
                                                 "optimize", "eval",           "sweep",          "plot"};
  return names;
}

RunConfig RunConfig::For(std::string_view command) {
  const auto it = Table().find(command);
  if (it == Table().end()) throw ConfigError("unknown command '" + std::string(command) + "'");
  RunConfig c;
  c.command_ = std::string(command);
  for (const auto& [k, v] : it->second) c.entries_.push_back({k, v});
  return c;
}

const RunConfig::Entry& RunConfig::Find(std::string_view key) const {
  for (const Entry& e : entries_) {
    if (e.key == key) return e;
  }
  throw ConfigError("unknown key '" + std::string(key) + "' for command " + command_);
}

bool RunConfig::Has(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
}

void RunConfig::Set(std::string_view key, std::string_view value, std::string_view source) {
  for (Entry& e : entries_) {
    if (e.key == key) {
      e.value = std::string(value);
      return;
    }
  }
  throw ConfigError(std::string(source) + ": unknown key '" + std::string(key) + "' for command " + command_);
}

void RunConfig::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = Trim(body);
    if (body.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected `key = value`");
    Set(Trim(body.substr(0, eq)), Trim(body.substr(eq + 1)), where);
  }
}

void RunConfig::ApplyOverride(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  Set(Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)), "command line");
}

const std::string& RunConfig::Get(std::string_view key) const { return Find(key).value; }

const std::string& RunConfig::Require(std::string_view key) const {
  const std::string& v = Get(key);
  if (v.empty()) throw ConfigError("missing required key '" + std::string(key) + "' for command " + command_);
  return v;
}

double RunConfig::GetDouble(std::string_view key) const {
  const std::string& v = Get(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "': not a number: '" + v + "'");
  }
  return out;
}

long long RunConfig::GetInt(std::string_view key) const {
  const std::string& v = Get(key);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "': not an integer: '" + v + "'");
  }
  return out;
}

std::uint64_t RunConfig::GetSeed(std::string_view key) const {
  const std::string& v = Get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "': not an unsigned integer: '" + v + "'");
  }
  return out;
}

bool RunConfig::GetBool(std::string_view key) const {
  const std::string& v = Get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + std::string(key) + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::GetList(std::string_view key) const {
  std::vector<std::string> out;
  std::stringstream ss(Get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string_view t = Trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string RunConfig::Resolved() const {
  std::ostringstream out;
  out << "# keymotion " << command_ << " (resolved configuration)\n";
  for (const Entry& e : entries_) out << e.key << " = " << e.value << '\n';
  return out.str();
}

std::uint64_t Fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t RunConfig::Hash() const { return Fnv1a(Resolved()); }

std::filesystem::path RunDirectory(const RunConfig& config, const std::string& override_root) {
  std::filesystem::path root = "runs";
  if (!override_root.empty()) {
    root = override_root;
  } else if (const char* env = std::getenv("KEYMOTION_RUN_DIR"); env != nullptr && *env != '\0') {
    root = env;
  }
  std::ostringstream name;
  name << config.command() << '-' << std::hex << std::setw(16) << std::setfill('0') << config.Hash();
  return root / name.str();
}

}  // namespace keymotion::cli

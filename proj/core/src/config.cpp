#include "stackseq/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace stackseq {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t parse_i64(const std::string& key, const std::string& value) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + value + "'");
  return v;
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

std::string fmt_float(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : value) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  size_t line_no = 0;
  bool budgets_converge_tail = false;

  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[' && s.back() == ']') {
      section = s.substr(1, s.size() - 2);
      if (section != "model" && section != "train" && section != "schedule" && section != "data")
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown section [" +
                          section + "]");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                        "' outside any section");

    if (section == "model") {
      if (key == "vocab_size") cfg.model.vocab_size = parse_i64(key, value);
      else if (key == "embed_dim") cfg.model.embed_dim = parse_i64(key, value);
      else if (key == "max_len") cfg.model.max_len = parse_i64(key, value);
      else if (key == "num_blocks") cfg.model.num_blocks = parse_i64(key, value);
      else if (key == "kernel_width") cfg.model.kernel_width = parse_i64(key, value);
      else if (key == "base_dilations") {
        cfg.model.base_dilations.clear();
        for (const std::string& p : split_list(value))
          cfg.model.base_dilations.push_back(parse_i64(key, p));
        if (cfg.model.base_dilations.empty())
          throw ConfigError("config: base_dilations must not be empty");
      } else throw ConfigError("config: unknown key '" + key + "' in [model]");
    } else if (section == "train") {
      if (key == "learning_rate") cfg.train.learning_rate = static_cast<float>(parse_f64(key, value));
      else if (key == "batch_size") cfg.train.batch_size = parse_i64(key, value);
      else if (key == "max_iterations") cfg.train.max_iterations = parse_i64(key, value);
      else if (key == "eval_every") cfg.train.eval_every = parse_i64(key, value);
      else if (key == "patience") cfg.train.patience = parse_i64(key, value);
      else if (key == "beta1") cfg.train.beta1 = static_cast<float>(parse_f64(key, value));
      else if (key == "beta2") cfg.train.beta2 = static_cast<float>(parse_f64(key, value));
      else if (key == "adam_eps") cfg.train.adam_eps = static_cast<float>(parse_f64(key, value));
      else if (key == "seed") cfg.train.seed = parse_u64(key, value);
      else throw ConfigError("config: unknown key '" + key + "' in [train]");
    } else if (section == "schedule") {
      if (key == "kind") {
        try {
          cfg.schedule.kind = schedule_kind_from_name(value);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
      } else if (key == "stack_times") cfg.schedule.stack_times = parse_i64(key, value);
      else if (key == "mode") {
        try {
          cfg.schedule.mode = stack_mode_from_name(value);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
      } else if (key == "budgets") {
        cfg.schedule.budgets.clear();
        budgets_converge_tail = false;
        std::vector<std::string> parts = split_list(value);
        for (size_t i = 0; i < parts.size(); ++i) {
          if (parts[i] == "converge") {
            if (i + 1 != parts.size())
              throw ConfigError("config: 'converge' only allowed as the last budget");
            budgets_converge_tail = true;
          } else {
            cfg.schedule.budgets.push_back(parse_u64(key, parts[i]));
          }
        }
      } else if (key == "stacked_learning_rate") {
        cfg.schedule.stacked_learning_rate = static_cast<float>(parse_f64(key, value));
      } else throw ConfigError("config: unknown key '" + key + "' in [schedule]");
    } else {  // data
      if (key == "path") cfg.data.path = value;
      else if (key == "target_path") cfg.data.target_path = value;
      else if (key == "split_ratio") cfg.data.split_ratio = parse_f64(key, value);
      else if (key == "split_seed") cfg.data.split_seed = parse_u64(key, value);
      else if (key == "overlap") cfg.data.overlap = parse_i64(key, value);
      else if (key == "fractions") {
        cfg.data.fractions.clear();
        for (const std::string& p : split_list(value))
          cfg.data.fractions.push_back(parse_f64(key, p));
      } else throw ConfigError("config: unknown key '" + key + "' in [data]");
    }
  }

  if (budgets_converge_tail) {
    cfg.schedule.final_until_converged = true;
    // "converge" as the sole entry of a ts/plain run means one
    // until-convergence stage; budgets then stay per-stage only.
    if (cfg.schedule.budgets.empty() && cfg.schedule.kind == Schedule::Kind::ts &&
        cfg.schedule.stack_times > 0)
      throw ConfigError("config: ts budgets must list Q_0..Q_{k-1} before 'converge'");
  } else if (!cfg.schedule.budgets.empty()) {
    cfg.schedule.final_until_converged = false;
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::resolved() const {
  std::ostringstream out;
  out << "[model]\n";
  out << "vocab_size=" << model.vocab_size << "\n";
  out << "embed_dim=" << model.embed_dim << "\n";
  out << "max_len=" << model.max_len << "\n";
  out << "num_blocks=" << model.num_blocks << "\n";
  out << "kernel_width=" << model.kernel_width << "\n";
  out << "base_dilations=";
  for (size_t i = 0; i < model.base_dilations.size(); ++i)
    out << (i ? "," : "") << model.base_dilations[i];
  out << "\n";
  out << "[train]\n";
  out << "learning_rate=" << fmt_float(train.learning_rate) << "\n";
  out << "batch_size=" << train.batch_size << "\n";
  out << "max_iterations=" << train.max_iterations << "\n";
  out << "eval_every=" << train.eval_every << "\n";
  out << "patience=" << train.patience << "\n";
  out << "beta1=" << fmt_float(train.beta1) << "\n";
  out << "beta2=" << fmt_float(train.beta2) << "\n";
  out << "adam_eps=" << fmt_float(train.adam_eps) << "\n";
  out << "seed=" << train.seed << "\n";
  out << "[schedule]\n";
  out << "kind=" << schedule_kind_name(schedule.kind) << "\n";
  out << "stack_times=" << schedule.stack_times << "\n";
  out << "mode=" << stack_mode_name(schedule.mode) << "\n";
  if (!schedule.budgets.empty() || schedule.final_until_converged) {
    out << "budgets=";
    for (size_t i = 0; i < schedule.budgets.size(); ++i)
      out << (i ? "," : "") << schedule.budgets[i];
    if (schedule.final_until_converged)
      out << (schedule.budgets.empty() ? "" : ",") << "converge";
    out << "\n";
  }
  if (schedule.stacked_learning_rate)
    out << "stacked_learning_rate=" << fmt_float(*schedule.stacked_learning_rate) << "\n";
  out << "[data]\n";
  if (!data.path.empty()) out << "path=" << data.path << "\n";
  if (!data.target_path.empty()) out << "target_path=" << data.target_path << "\n";
  out << "split_ratio=" << fmt_float(static_cast<float>(data.split_ratio)) << "\n";
  out << "split_seed=" << data.split_seed << "\n";
  out << "overlap=" << data.overlap << "\n";
  if (!data.fractions.empty()) {
    out << "fractions=";
    for (size_t i = 0; i < data.fractions.size(); ++i)
      out << (i ? "," : "") << fmt_float(static_cast<float>(data.fractions[i]));
    out << "\n";
  }
  return out.str();
}

}  // namespace stackseq

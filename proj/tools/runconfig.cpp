#include "runconfig.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "tfkit/common.hpp"

namespace tfkit::cli {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

}  // namespace

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string format_value(float v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", double(v));
  return buf;
}
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(std::size_t v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(const std::string& v) { return v; }
std::string format_value(const std::filesystem::path& v) { return v.string(); }
std::string format_value(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); i++) s += (i ? "," : "") + format_value(v[i]);
  return s;
}

Command::Command(CLI::App& parent, const std::string& name, const std::string& description)
    : app_(parent.add_subcommand(name, description)), name_(name) {
  app_->add_option("--config", config_path_, "key=value file; command-line flags take precedence");
  option("threads", threads, "worker threads (0 = all cores)");
}

CLI::Option* Command::list(const std::string& name, std::vector<double>& value, size_t count,
                           const std::string& description) {
  auto* opt = app_->add_option("--" + name, value, description)
                  ->delimiter(',')
                  ->expected(int(count))
                  ->default_str(format_value(value));
  record(name, value);
  return opt;
}

CLI::Option* Command::flag(const std::string& name, bool& value, const std::string& description) {
  auto* opt = app_->add_flag("--" + name, value, description);
  record(name, value);
  return opt;
}

void Command::finalize() {
  if (!config_path_.empty()) {
    auto kv = read_key_values(config_path_);
    for (const auto& [key, value] : kv) {
      if (key == "command") {
        if (value != name_) throw InputError("config is for command '" + value + "', not '" + name_ + "'");
        continue;
      }
      CLI::Option* opt = nullptr;
      for (auto* o : app_->get_options())
        if (o->check_name(key) || o->check_name("--" + key)) opt = o;
      if (!opt || key == "config") throw InputError("unknown config key '" + key + "' in " + config_path_);
      if (opt->count() > 0) continue;
      opt->clear();
      if (opt->get_expected_max() > 1)
        for (const auto& part : split_commas(value)) opt->add_result(part);
      else
        opt->add_result(value);
      opt->run_callback();
    }
  }
  for (auto* opt : required_)
    if (opt->empty()) throw InputError("missing required argument " + opt->get_name());
}

std::string Command::serialize() const {
  std::string out = "command=" + name_ + "\n";
  for (const auto& [key, get] : fields_) out += key + "=" + get() + "\n";
  return out;
}

void Command::write_run_cfg(const std::filesystem::path& directory) const {
  auto dir = directory.empty() ? std::filesystem::path(".") : directory;
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "run.cfg");
  out << serialize();
  if (!out) throw InputError("cannot write " + (dir / "run.cfg").string());
}

}  // namespace tfkit::cli

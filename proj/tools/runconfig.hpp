#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace tfkit::cli {

// Plain key=value run configuration. Keys are option names without leading
// dashes (positionals by name); `command` names the subcommand.
using KeyValues = std::map<std::string, std::string>;

KeyValues read_key_values(const std::filesystem::path& path);

std::string format_value(double v);
std::string format_value(float v);
std::string format_value(int v);
std::string format_value(std::size_t v);
std::string format_value(bool v);
std::string format_value(const std::string& v);
std::string format_value(const std::filesystem::path& v);
std::string format_value(const std::vector<double>& v);

// A subcommand whose every option is mirrored into run.cfg.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description);

  CLI::App* app() const { return app_; }
  const std::string& name() const { return name_; }

  template <typename T>
  CLI::Option* positional(const std::string& name, T& value, const std::string& description) {
    auto* opt = app_->add_option(name, value, description);
    record(name, value);
    required_.push_back(opt);
    return opt;
  }

  template <typename T>
  CLI::Option* option(const std::string& name, T& value, const std::string& description) {
    auto* opt = app_->add_option("--" + name, value, description)->capture_default_str();
    record(name, value);
    return opt;
  }

  CLI::Option* list(const std::string& name, std::vector<double>& value, size_t count, const std::string& description);
  CLI::Option* flag(const std::string& name, bool& value, const std::string& description);

  // Applies the --config file to options absent from the command line and
  // checks that required positionals are set.
  void finalize();

  std::string serialize() const;
  void write_run_cfg(const std::filesystem::path& directory) const;

  int threads = 0;

 private:
  template <typename T>
  void record(const std::string& name, T& value) {
    fields_.push_back({name, [&value] { return format_value(value); }});
  }

  CLI::App* app_;
  std::string name_;
  std::string config_path_;
  std::vector<CLI::Option*> required_;
  std::vector<std::pair<std::string, std::function<std::string()>>> fields_;
};

}  // namespace tfkit::cli

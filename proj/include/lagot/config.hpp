#pragma once

#include <map>
#include <string>
#include <vector>

#include "lagot/lagrangian.hpp"
#include "lagot/metric_learn.hpp"
#include "lagot/nlot.hpp"

namespace lagot {

// Flat key = value run configuration with a fixed schema. Unknown keys and
// malformed values are rejected; the resolved config serializes canonically
// (sorted keys) and round-trips through its own text form.
class RunConfig {
 public:
  enum class Type { Int, Double, String };
  struct SchemaEntry {
    Type type;
    std::string default_value;
    const char* doc;
  };

  static const std::map<std::string, SchemaEntry>& schema();
  static RunConfig defaults();
  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  void apply_overrides(const std::vector<std::string>& assignments);  // "key=value"

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  std::vector<int> get_layers(const std::string& key) const;  // comma-separated

  std::string serialize() const;
  void write(const std::string& path) const;

  bool operator==(const RunConfig& other) const { return values_ == other.values_; }

  // Domain builders. The lagrangian builder covers the fixed kinds; the
  // learned metric is owned by the metric-learning state.
  LagrangianSpec lagrangian() const;
  NlotConfig nlot_config() const;
  MetricLearnConfig metric_config() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lagot

#pragma once

#include "vinestress/resample.hpp"
#include "vinestress/scenario.hpp"
#include "vinestress/simstudy.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vinestress {

//! `key = value` lines; `#` starts a comment; later keys override earlier
//! ones. Lookups record which keys were used so leftovers can be rejected.
class KeyValueConfig {
public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "config");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  //! Comma-separated numbers.
  std::vector<double> get_doubles(const std::string& key) const;
  //! Comma-separated words.
  std::vector<std::string> get_list(const std::string& key) const;
  //! Keys starting with `prefix`.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  void set(const std::string& key, const std::string& value);
  //! Throws InputError listing keys that were never looked up.
  void require_all_used() const;
  const std::string& source() const { return source_; }

private:
  std::string source_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

//! optimizer.{population,iterations,restarts,seed,weight,crossover,
//! tolerance,patience,polish,workers} under the given prefix.
OptimizerConfig optimizer_from_config(const KeyValueConfig& kv, const std::string& prefix,
                                      OptimizerConfig base = {});

//! pipeline.{marginals,hybrid_q_lo,hybrid_q_hi,families,criterion,
//! independence_level,rank_pseudo_obs}.
PipelineConfig pipeline_from_config(const KeyValueConfig& kv, int columns);

//! Marginal choices for fit-marginals: `default`, `marginal.<name>`,
//! `hybrid.q_lo`, `hybrid.q_hi`.
struct MarginalSpec {
  MarginalKind default_kind = MarginalKind::skew_t;
  std::map<std::string, MarginalKind> per_column;
  double q_lo = 0.15;
  double q_hi = 0.85;

  MarginalKind kind_for(const std::string& column) const;
};
MarginalSpec marginal_spec_from_config(const KeyValueConfig& kv);

//! Vine generator from `vine.*`, `marginal.<j>` and `g` keys (1-based).
MetaVineSpec meta_vine_from_config(const KeyValueConfig& kv);

//! Full study configuration; see the README for the schema.
StudyConfig study_from_config(const KeyValueConfig& kv);

} // namespace vinestress

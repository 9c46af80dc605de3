#pragma once

#include "vinestress/bicop.hpp"
#include "vinestress/regimes.hpp"
#include "vinestress/resample.hpp"
#include "vinestress/rvine.hpp"
#include "vinestress/scenario.hpp"
#include "vinestress/simstudy.hpp"
#include "vinestress/univariate.hpp"

#include <nlohmann/json.hpp>

#include <string>

//! JSON converters found by nlohmann::json through argument-dependent lookup.
//! Types that are read back (models) have from_json as well; reports are
//! write-only. Malformed documents raise InputError via the load helpers.
namespace vinestress {

using json = nlohmann::ordered_json;

void to_json(json& j, const SkewTParams& p);
void from_json(const json& j, SkewTParams& p);
void to_json(json& j, const HybridMarginal& h);
void from_json(const json& j, HybridMarginal& h);
void to_json(json& j, const MarginalModel& m);
void from_json(const json& j, MarginalModel& m);

void to_json(json& j, const BivariateCopula& c);
void from_json(const json& j, BivariateCopula& c);
void to_json(json& j, const RVineStructure& s);
void from_json(const json& j, RVineStructure& s);
void to_json(json& j, const RVineModel& m);
void from_json(const json& j, RVineModel& m);
void to_json(json& j, const LeafConstrainedVine& v);
void from_json(const json& j, LeafConstrainedVine& v);

void to_json(json& j, const DependenceSummary& d);
void to_json(json& j, const OptimizerDiagnostics& d);
void to_json(json& j, const ScenarioEstimate& e);
void to_json(json& j, const BootstrapResult& r);
void to_json(json& j, const MixtureParams& p);
void to_json(json& j, const MixtureFit& f);
void to_json(json& j, const SimulationReport& r);

//! Named marginal models, one per dataset column.
struct MarginalSet {
  std::vector<std::string> names;
  std::vector<MarginalModel> models;
};
void to_json(json& j, const MarginalSet& s);
void from_json(const json& j, MarginalSet& s);

//! Parses a file, converting parse and schema failures to InputError.
json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);
//! Two-space indented text with a trailing newline.
std::string dump(const json& j);

template <class T>
T json_as(const json& j, const std::string& what)
{
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

//! Tree-by-tree listing of edges as "a,b | cond  family(params)" (1-based).
std::string tree_listing(const RVineModel& m, const std::vector<std::string>& names = {});

} // namespace vinestress

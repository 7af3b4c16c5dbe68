#pragma once

// JSON and CSV forms of filtered martingales, decompositions and reports.
//
// A filtered martingale file:
//   { "points": [{"id": str, "weight": float}],
//     "filtration": [[[id, ...], ...], ...],      // P_0 .. P_K, P_0 trivial
//     "m": int,
//     "martingale": [{"t": int, "values": {id: [float x m]}}] }   // t = 1..K
// A decomposition file carries the same keys for the final space, followed by
// the increments, martingales, norms, per-step metadata and truncation data.
// Malformed input raises SchemaError.

#include <string>
#include <vector>

#include <json.hpp>

#include "indimart/decompose.hpp"
#include "indimart/space.hpp"
#include "indimart/verify.hpp"

namespace indimart {

struct FilteredMartingale {
  WeightedSpace space;
  Filtration filtration;
  std::size_t m = 1;
  std::vector<RandomVector> X;  // X_1 .. X_K
};

FilteredMartingale martingale_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const FilteredMartingale& fm);

Decomposition decomposition_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const Decomposition& d);

nlohmann::ordered_json to_json(const Report& r);

// Parses text; syntax errors become SchemaError.
nlohmann::json parse_json(const std::string& text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

// n,k,norm_sq_Y,norm_sq_Z,norm_sq_dX,norm_sq_X,residual
std::string norms_csv(const Decomposition& d);
// k,n,residual_norm
std::string stages_csv(const Decomposition& d);

}  // namespace indimart

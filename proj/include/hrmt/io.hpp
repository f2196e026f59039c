#pragma once
#include <string>

#include <json.hpp>

#include "hrmt/density_ident.hpp"
#include "hrmt/dgp.hpp"
#include "hrmt/mtr_ident.hpp"

namespace hrmt {

using Json = nlohmann::json;

// --- rule files -------------------------------------------------------------
// {"J":3,"T":4,"treatments":[{"k":1,"cells":[["free","below","below"]]},...]}
TreatmentRule rule_from_json(const Json& j);
Json rule_to_json(const TreatmentRule& r);

// [{k, constant, terms:[{coeff, dims:[1-based dims]}]}, ...]
Json decomposition_report(const std::vector<Decomposition>& ds);

// --- DGP config -------------------------------------------------------------
struct DgpConfig {
    DgpSpec spec;
    size_t n_obs = 0;
    uint64_t seed = 0;
};

DgpConfig dgp_from_json(const Json& j);

DensitySpec density_from_json(const Json& j, int J);
Json density_to_json(const DensitySpec& d);
MtrSpec mtr_from_json(const Json& j);
ThresholdSpec threshold_from_json(const Json& j, int J, int zdim);
Json threshold_to_json(const ThresholdSpec& t);
InstrumentSpec instrument_from_json(const Json& j);

// --- datasets ---------------------------------------------------------------
void write_dataset_csv(const Dataset& ds, const std::string& path,
                       const std::string& latent_path = "");
Dataset read_dataset_csv(const std::string& path);

// --- lattice artifacts ------------------------------------------------------
void write_lattice_csv(const LatticeNd& lat, const std::string& path,
                       const std::string& value_name = "f");
LatticeNd read_lattice_csv(const std::string& path);

Json constraint_system_to_json(const ConstraintSystem& sys);
ConstraintSystem constraint_system_from_json(const Json& j);

// --- misc -------------------------------------------------------------------
Json load_json(const std::string& path);
void save_json(const Json& j, const std::string& path);
std::string file_hash_hex(const std::string& path);
std::string json_hash_hex(const Json& j);

}  // namespace hrmt

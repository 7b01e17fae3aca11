#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lbdmids/data.hpp"

namespace lbdmids {

// AR(1) spec for one feature of one class. `spread` is the stationary
// standard deviation: innovations are scaled by sqrt(1 - rho^2), so the
// marginal distribution is N(mean, spread^2) regardless of rho.
struct FeatureProfile {
    double mean = 0.0;
    double spread = 1.0;
    double rho = 0.0;
};

struct ClassProfile {
    std::string class_name;
    std::vector<FeatureProfile> features; // aligned with schema feature columns
};

struct ProfileSet {
    std::vector<ClassProfile> classes;
    const ClassProfile* find(const std::string& class_name) const;
};

// Built-in profiles covering every schema class. Most classes are well
// separated; one pair overlaps (bot_iot: DDoS/DoS, unsw_nb15: Exploits/DoS)
// so evaluation reports exercise nonzero FP/FN paths.
ProfileSet default_profiles(const DatasetSchema& schema);

// JSON profile config:
//   {"defaults": {"mean":0,"spread":1,"rho":0.2},
//    "classes": {"DoS": {"rho":0.8, "features": {"rate":{"mean":3600,"spread":320}}}}}
// Class-level mean/spread/rho seed every feature, feature entries override.
ProfileSet parse_profiles(const std::string& json_text, const DatasetSchema& schema);
ProfileSet load_profiles(const std::string& path, const DatasetSchema& schema);

// Writes a labeled CSV with the schema's feature columns plus label column.
// Rows of each class follow their AR(1) chains; classes are interleaved
// round-robin in blocks of `block_rows` so windowed slices keep within-class
// context. Deterministic per seed.
void generate_csv(const DatasetSchema& schema, const ProfileSet& profiles,
                  const std::vector<std::pair<std::string, std::size_t>>& counts,
                  std::uint64_t seed, const std::string& out_path,
                  std::size_t block_rows = 256);

} // namespace lbdmids

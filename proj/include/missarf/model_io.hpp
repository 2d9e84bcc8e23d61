#pragma once

#include <string>

#include "missarf/density.hpp"
#include "missarf/forest.hpp"

namespace missarf {

inline constexpr int kModelFormatVersion = 1;

// Persisted ARF bundle: schema, hyperparameters, trees, leaf geometries,
// weights and leaf density parameters. Loaded models support routing,
// density evaluation and imputation; bags and leaf row memberships are not
// persisted, so a loaded forest cannot be resampled or refitted.
struct ArfModel {
    Forest forest;
    ArfFitReport report;
    DensityModel density;
};

std::string serialize_model(const ArfModel& model);
ArfModel deserialize_model(const std::string& text);

void save_model(const ArfModel& model, const std::string& path);
ArfModel load_model(const std::string& path);

// Deterministic 64-bit structural digest of a density model, reported in
// provenance sidecars.
std::string model_fingerprint(const DensityModel& model);

}  // namespace missarf

#pragma once

namespace retistack {

constexpr const char* kVersion = "0.1.0";

// File format schema versions, bumped on any incompatible change.
constexpr int kManifestSchemaVersion = 1;
constexpr int kFoldSchemaVersion = 1;
constexpr int kUpsampleSchemaVersion = 1;
constexpr int kPredictionSchemaVersion = 1;
constexpr int kModelSchemaVersion = 1;
constexpr int kStackedSchemaVersion = 1;
constexpr int kTensorSchemaVersion = 1;

} // namespace retistack

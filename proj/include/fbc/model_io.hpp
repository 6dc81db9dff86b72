#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fbc/graph.hpp"
#include "fbc/sharing.hpp"
#include "fbc/trainer.hpp"

namespace fbc {

/// A model directory on disk:
///   <dir>/model.json        manifest (fixed schema, stable key order)
///   <dir>/blobs/<name>.bin  float32 arrays
///
/// Blob files carry an 8-byte magic "FBCTNSR1", one dtype byte (0x01 =
/// float32), the rank and dims as unsigned 32-bit little-endian, then the
/// payload as little-endian float32. Computation is 64-bit throughout;
/// only storage is 32-bit.
struct ModelBundle {
    ModelGraph graph;
    LossSpec loss;
    OptimizerState optimizer;
    int batch_size = 4;
    SharingPlan plan;
};

/// Deterministic bytes: saving the same bundle twice produces identical
/// files.
void save_model(const ModelBundle& bundle, const std::filesystem::path& dir);

ModelBundle load_model(const std::filesystem::path& dir);

/// Datasets pair <dir>/inputs.bin with <dir>/targets.bin; targets may be
/// rank 4 or rank 1 (class indices).
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& d, const std::filesystem::path& dir);

/// Raw blob primitives (exposed for tools and tests).
struct Blob {
    std::vector<std::uint32_t> dims;
    std::vector<double> data;
};
void write_blob(const std::filesystem::path& file, const std::vector<std::uint32_t>& dims,
                const std::vector<double>& data);
Blob read_blob(const std::filesystem::path& file, const std::string& name);

}  // namespace fbc

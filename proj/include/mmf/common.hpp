#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmf {

// Element type for all tensor math. f64 is the default; configure the build
// with -DMMF_USE_F32 to trade precision for memory.
#ifdef MMF_USE_F32
using scalar = float;
#else
using scalar = double;
#endif

using Shape = std::vector<int64_t>;

// Base of the project exception hierarchy.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes (matmul inner dims, concat mismatch, ...).
struct ShapeError : Error {
    using Error::Error;
};

// Invalid static configuration (specs, hyperparameters, run configs).
struct ConfigError : Error {
    using Error::Error;
};

// A violated call contract (non-scalar loss, empty input, odd n, ...).
struct ContractError : Error {
    using Error::Error;
};

// Bad data encountered at runtime (manifest fields out of range, ...).
struct ValidationError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Deterministic sub-seed for a named purpose ("split", "model-init", ...).
// Mixing is splitmix64 over the base seed xor an FNV-1a hash of the tag.
uint64_t derive_seed(uint64_t base, const std::string& tag);

}  // namespace mmf

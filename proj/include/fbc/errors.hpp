#pragma once

#include <stdexcept>
#include <string>

namespace fbc {

// Dimension / validation problems: mismatched shapes, bad plans,
// inconsistent configuration.
class shape_error : public std::runtime_error {
public:
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical problems: NaN/Inf propagation, divergence, non-convergence.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// File and serialization problems. `kind` plus the offending entity name
// keep the failure modes distinguishable in tests and in the CLI.
class io_error : public std::runtime_error {
public:
    enum class kind {
        open_failed,
        bad_magic,
        bad_version,
        bad_schema,
        dangling_blob,
        duplicate_blob,
        length_mismatch,
        shape_chain,
        empty_dataset,
        pairing_mismatch,
    };

    io_error(kind k, std::string entity, const std::string& msg)
        : std::runtime_error(msg), kind_(k), entity_(std::move(entity)) {}

    kind what_kind() const { return kind_; }
    const std::string& entity() const { return entity_; }

private:
    kind kind_;
    std::string entity_;
};

}  // namespace fbc

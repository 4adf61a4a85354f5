#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "decennt/tensor.hpp"

namespace decennt {

// One labeled multivariate series: components x timepoints, plus an
// optional per-timepoint ground-truth event mask.
struct Sample {
    Matrix series;
    int label = 0;
    std::optional<std::vector<std::uint8_t>> event_mask;
    std::string id;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t components = 0;
    std::size_t timepoints = 0;
    std::string provenance;

    std::size_t count_class(int label) const;
    // shapes agree, values finite, both classes present
    void validate() const;
};

// Binary dataset container: "DCNT" magic, u16 version, u32 n/T/count
// header, then per sample u8 label, u8 has_mask, optional T mask bytes,
// n*T little-endian f64 row-major, and a trailing CRC32 of the sample
// records. Everything is little-endian on disk.
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

// Manifest-driven CSV import: each manifest line is `id,label,mask-file`
// (mask-file may be empty); the series for `id` is read from `<id>.csv`
// next to the manifest, n rows x T comma-separated columns.
Dataset import_csv_dataset(const std::string& manifest_path);

// Stratified, seed-deterministic fold assignment; returns the fold id of
// every sample. Overall fold sizes differ by at most one and every fold
// contains every class.
std::vector<std::size_t> split_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed);

// --- synthetic keyword-in-noise spectrograms ---------------------------

struct KeywordSpec {
    std::size_t count = 1000;      // total samples, balanced classes
    std::size_t components = 32;   // frequency channels
    std::size_t timepoints = 64;
    std::size_t keyword_len = 16;  // K consecutive mixed timepoints
    double snr = 2.0;              // template strength before renormalization

    void validate() const;
};

// Class 1: smoothed unit-variance channel noise with a fixed band-limited
// template mixed over K consecutive timepoints at a random start, the
// mixed window then renormalized per channel to match the background
// amplitude distribution. Class 0: noise only. Masks mark the K mixed
// timepoints.
Dataset synth_keyword_dataset(const KeywordSpec& spec, std::uint64_t seed);

// --- switching vector-autoregression benchmark -------------------------

struct Regime {
    std::size_t start = 1;  // 1-based first timepoint governed by this regime
    Matrix adjacency;       // n x n, entries in {0,1}; adjacency(i,j)=1 means j -> i
    Matrix coefficients;    // same support as adjacency
};

struct SwitchingVarSpec {
    std::size_t components = 0;
    std::size_t timepoints = 0;
    std::vector<Regime> regimes;
    double noise_scale = 1.0;
    double spectral_radius_cap = 0.95;

    void validate() const;
    const Regime& regime_at(std::size_t t) const;  // t is 1-based
};

// Class-1 spec obtained by transposing coefficients/adjacency of one
// regime, i.e. reversing every directed edge in it.
SwitchingVarSpec reverse_regime_edges(const SwitchingVarSpec& spec, std::size_t regime_index);

struct SvarDataset {
    Dataset dataset;
    SwitchingVarSpec class0;
    SwitchingVarSpec class1;
};

// x_{t+1} = C(t) x_t + sigma * noise, with per-class regime sequences.
SvarDataset synth_svar_dataset(const SwitchingVarSpec& class0, std::size_t reversed_regime,
                               std::uint64_t seed, std::size_t count_per_class);

// Random two-regime benchmark spec with `edges_per_regime` off-diagonal
// directed edges (never both directions of a pair) plus diagonal decay.
SwitchingVarSpec make_svar_benchmark(std::size_t components, std::size_t timepoints,
                                     std::size_t edges_per_regime, double coupling,
                                     double noise_scale, std::uint64_t seed);

// Union of off-diagonal directed support over all regimes of a spec.
Matrix union_support(const SwitchingVarSpec& spec);

double spectral_radius(const Matrix& m);

}  // namespace decennt

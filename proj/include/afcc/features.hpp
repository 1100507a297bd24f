#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "afcc/scales.hpp"

namespace afcc {

struct FrameConfig {
    double frame_len_ms = 25.0;
    double hop_ms = 10.0;
    double preemphasis = 0.97;
    // window is Hamming; fft_size 0 picks the smallest power of two that
    // holds one frame
    size_t fft_size = 0;
    double energy_floor = 1e-10;

    size_t frame_samples(const AudioConfig& cfg) const;
    size_t hop_samples(const AudioConfig& cfg) const;
    size_t effective_fft_size(const AudioConfig& cfg) const;
    void validate(const AudioConfig& cfg) const;
    uint64_t hash(const AudioConfig& cfg) const;
};

enum class FilterbankNorm { equal_height, equal_area };

const char* to_string(FilterbankNorm n);

struct FilterbankConfig {
    int num_filters = 26;
    FilterbankNorm normalization = FilterbankNorm::equal_height;
    WarpFunction warp;
};

// Triangular filters over FFT bins; edges uniform on the warped axis.
struct Filterbank {
    int num_filters = 0;
    size_t num_bins = 0;
    double bin_hz = 0.0;
    std::vector<double> weights;        // num_filters x num_bins, row-major
    std::vector<double> edge_freqs_hz;  // num_filters + 2, ascending

    const double* row(int j) const { return weights.data() + static_cast<size_t>(j) * num_bins; }
};

struct Spectrogram {
    size_t num_frames = 0;
    size_t num_bins = 0;
    std::vector<double> power;  // num_frames x num_bins, row-major
    std::vector<double> log_energy;
    std::vector<double> frame_times_s;

    const double* frame(size_t t) const { return power.data() + t * num_bins; }
};

// T x 13 feature rows: c1..c12 then log-energy.
struct FeatureMatrix {
    static constexpr int kDim = 13;
    size_t num_frames = 0;
    std::vector<double> values;  // num_frames x 13, row-major
    std::vector<double> frame_times_s;

    double at(size_t t, int d) const { return values[t * kDim + static_cast<size_t>(d)]; }
    const double* row(size_t t) const { return values.data() + t * kDim; }
    double* row(size_t t) { return values.data() + t * kDim; }
};

Spectrogram frame_and_spectrum(std::span<const double> signal, const AudioConfig& cfg,
                               const FrameConfig& fc);

Filterbank build_filterbank(const FilterbankConfig& fbc, const FrameConfig& fc,
                            const AudioConfig& cfg);

// Cepstra from already-computed spectra; the warp-independent half of
// extract_features is reusable across candidate warps.
FeatureMatrix cepstra_from_spectra(const Spectrogram& spec, const Filterbank& fb,
                                   const FrameConfig& fc);

FeatureMatrix extract_features(std::span<const double> signal, const AudioConfig& cfg,
                               const FrameConfig& fc, const FilterbankConfig& fbc);

// Orthonormal DCT-II matrix, row-major n x n (row k = coefficient k).
std::vector<double> dct_matrix(int n);

void write_features_csv(const FeatureMatrix& fm, std::ostream& os);
FeatureMatrix read_features_csv(std::istream& is);
void write_features_bin(const FeatureMatrix& fm, uint64_t config_hash, std::ostream& os);
FeatureMatrix read_features_bin(std::istream& is, uint64_t* config_hash = nullptr);

}  // namespace afcc

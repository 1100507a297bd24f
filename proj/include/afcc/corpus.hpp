#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afcc/eval.hpp"
#include "afcc/scales.hpp"

namespace afcc {

struct ManifestEntry {
    std::string path;  // relative to the manifest file
    std::string speaker;
    std::string word;
    Group group = Group::native;
    std::optional<double> human_score;
};

struct CorpusManifest {
    std::vector<ManifestEntry> entries;
};

struct Corpus {
    CorpusManifest manifest;
    std::vector<std::vector<double>> audio;  // aligned with manifest.entries
    double sample_rate_hz = 0.0;
};

struct WordTemplate {
    std::string name;
    std::array<double, 3> formants_hz{730.0, 1090.0, 2440.0};
    std::array<double, 3> bandwidths_hz{90.0, 110.0, 170.0};
};

struct SynthSpec {
    std::vector<WordTemplate> words;
    int speakers_per_group = 20;
    int utterances_per_speaker = 10;
    double formant_shift_hz = 300.0;  // applied to formant 2 of the non-native group
    double speaker_jitter_hz = 40.0;
    double utterance_jitter_hz = 15.0;
    double duration_s = 0.5;
    double noise_snr_db = 30.0;
    uint64_t seed = 0;

    void validate(const AudioConfig& cfg) const;
};

CorpusManifest read_manifest(const std::string& path);
void write_manifest(const CorpusManifest& manifest, const std::string& path);

// Decode every WAV referenced by the manifest; rates must match cfg.
Corpus load_corpus(const std::string& manifest_path, const AudioConfig& cfg);

// Impulse-train-through-resonators stand-in corpus; WAVs and the manifest
// are written under out_dir. Returns the manifest path.
std::string synthesize_corpus(const SynthSpec& spec, const AudioConfig& cfg,
                              const std::string& out_dir);

void write_wav_pcm16(const std::string& path, std::span<const double> samples,
                     double sample_rate_hz);
// Returns samples in [-1, 1) and the file's sample rate.
std::pair<std::vector<double>, double> read_wav_pcm16(const std::string& path);

}  // namespace afcc

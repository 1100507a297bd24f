#pragma once

#include <string>
#include <vector>

#include "afcc/corpus.hpp"
#include "afcc/search.hpp"

namespace afcc {

// Everything the evaluation chain needs besides the warp itself.
struct PipelineConfig {
    AudioConfig audio;
    FrameConfig frame;
    int num_filters = 26;
    FilterbankNorm normalization = FilterbankNorm::equal_height;
    HmmConfig hmm;
    LooConfig loo;
    double rescale_target_mu = 4.0;
    double rescale_target_sigma = 1.0;
    uint64_t seed = 0;
};

// One word's corpus with the warp-independent work (framing, FFT) done once;
// candidate warps only rebuild the filterbank and cepstra.
struct PreparedWord {
    std::string word;
    AudioConfig audio;
    FrameConfig frame;
    std::vector<std::string> sample_ids;
    std::vector<std::string> speakers;
    std::vector<Group> groups;
    std::vector<std::optional<double>> human_scores;
    std::vector<Spectrogram> spectra;
};

PreparedWord prepare_word(const Corpus& corpus, const std::string& word,
                          const PipelineConfig& cfg);

struct ScaleEvalResult {
    double rate = 0.0;
    double threshold = 0.0;
    GroupGaussian fit_nonnative;
    GroupGaussian fit_native;
    ScoreSet scores;  // rescaled filled
    LooResult loo;
};

// Full chain for one warp: filterbank -> cepstra -> LOO -> rescale -> fits
// -> Bayes rate. eval_seed keys the fold assignment.
ScaleEvalResult evaluate_warp(const PreparedWord& prepared, const WarpFunction& warp,
                              FilterbankNorm norm, const PipelineConfig& cfg,
                              uint64_t eval_seed);

// Search objective over PCHP knots; per-point seeds derive from the global
// seed and the point's bit pattern, so re-evaluating a point repeats exactly.
Objective make_objective(const PreparedWord& prepared, const PipelineConfig& cfg);

uint64_t point_hash(const InterpolationPoint& p);

}  // namespace afcc

#pragma once

#include <string>

#include "afcc/corpus.hpp"
#include "afcc/pipeline.hpp"

namespace afcc {

// Single JSON document driving every CLI command. Unknown keys are errors.
struct RunConfig {
    AudioConfig audio;
    FrameConfig frame;
    int num_filters = 26;
    FilterbankNorm normalization = FilterbankNorm::equal_height;
    HmmConfig hmm;
    LooConfig loo;
    SearchConfig search;
    SynthSpec synth;
    std::string corpus_manifest;  // relative paths resolve against the config file
    std::string output_dir = "out";
    double rescale_target_mu = 4.0;
    double rescale_target_sigma = 1.0;
    uint64_t seed = 0;

    PipelineConfig pipeline() const;
    void validate() const;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace afcc

#include "afcc/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace afcc {

namespace {

void reject_unknown(const json& j, const std::string& scope,
                    const std::set<std::string>& known) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key()))
            throw DataError("config: unknown key '" + scope + it.key() + "'");
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

FilterbankNorm norm_from_string(const std::string& s) {
    if (s == "equal_height") return FilterbankNorm::equal_height;
    if (s == "equal_area") return FilterbankNorm::equal_area;
    throw DataError("config: unknown filterbank normalization '" + s + "'");
}

}  // namespace

PipelineConfig RunConfig::pipeline() const {
    PipelineConfig p;
    p.audio = audio;
    p.frame = frame;
    p.num_filters = num_filters;
    p.normalization = normalization;
    p.hmm = hmm;
    p.loo = loo;
    p.rescale_target_mu = rescale_target_mu;
    p.rescale_target_sigma = rescale_target_sigma;
    p.seed = seed;
    return p;
}

void RunConfig::validate() const {
    audio.validate();
    frame.validate(audio);
    hmm.validate();
    loo.validate();
    search.validate();
    synth.validate(audio);
    if (num_filters < 13)
        throw DataError("config: num_filters must be >= 13 for 12 cepstral coefficients");
    if (!(rescale_target_sigma > 0.0))
        throw DataError("config: rescale target sigma must be positive");
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.synth.words.push_back(WordTemplate{"a", {730.0, 1090.0, 2440.0}, {90.0, 110.0, 170.0}});
    cfg.corpus_manifest = "out/corpus/manifest.csv";
    cfg.seed = 20250809;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw DataError("config: " + path + " is not valid JSON: " + e.what());
    }

    RunConfig cfg = default_run_config();
    try {
        reject_unknown(j, "", {"audio", "frame", "filterbank", "hmm", "loo", "search", "synth",
                               "corpus", "output_dir", "rescale", "seed"});
        if (j.contains("audio")) {
            const auto& a = j["audio"];
            reject_unknown(a, "audio.", {"sample_rate_hz"});
            double fs = cfg.audio.sample_rate_hz;
            read_if(a, "sample_rate_hz", fs);
            cfg.audio = AudioConfig::from_sample_rate(fs);
        }
        if (j.contains("frame")) {
            const auto& f = j["frame"];
            reject_unknown(f, "frame.",
                           {"frame_len_ms", "hop_ms", "preemphasis", "fft_size", "energy_floor"});
            read_if(f, "frame_len_ms", cfg.frame.frame_len_ms);
            read_if(f, "hop_ms", cfg.frame.hop_ms);
            read_if(f, "preemphasis", cfg.frame.preemphasis);
            read_if(f, "fft_size", cfg.frame.fft_size);
            read_if(f, "energy_floor", cfg.frame.energy_floor);
        }
        if (j.contains("filterbank")) {
            const auto& f = j["filterbank"];
            reject_unknown(f, "filterbank.", {"num_filters", "normalization"});
            read_if(f, "num_filters", cfg.num_filters);
            if (f.contains("normalization"))
                cfg.normalization = norm_from_string(f["normalization"].get<std::string>());
        }
        if (j.contains("hmm")) {
            const auto& h = j["hmm"];
            reject_unknown(h, "hmm.", {"num_states", "mixtures_per_state", "max_iters",
                                       "ll_tolerance", "variance_floor_factor"});
            read_if(h, "num_states", cfg.hmm.num_states);
            read_if(h, "mixtures_per_state", cfg.hmm.mixtures_per_state);
            read_if(h, "max_iters", cfg.hmm.max_iters);
            read_if(h, "ll_tolerance", cfg.hmm.ll_tolerance);
            read_if(h, "variance_floor_factor", cfg.hmm.variance_floor_factor);
        }
        if (j.contains("loo")) {
            const auto& l = j["loo"];
            reject_unknown(l, "loo.", {"num_folds", "outlier_filter"});
            read_if(l, "num_folds", cfg.loo.num_folds);
            read_if(l, "outlier_filter", cfg.loo.outlier_filter);
        }
        if (j.contains("search")) {
            const auto& s = j["search"];
            reject_unknown(s, "search.", {"num_candidates", "stall_limit", "initial_radius",
                                          "max_iterations", "mu_init"});
            read_if(s, "num_candidates", cfg.search.num_candidates);
            read_if(s, "stall_limit", cfg.search.stall_limit);
            read_if(s, "initial_radius", cfg.search.initial_radius);
            read_if(s, "max_iterations", cfg.search.max_iterations);
            read_if(s, "mu_init", cfg.search.mu_init);
        }
        if (j.contains("synth")) {
            const auto& s = j["synth"];
            reject_unknown(s, "synth.",
                           {"words", "speakers_per_group", "utterances_per_speaker",
                            "formant_shift_hz", "speaker_jitter_hz", "utterance_jitter_hz",
                            "duration_s", "noise_snr_db"});
            if (s.contains("words")) {
                cfg.synth.words.clear();
                for (const auto& w : s["words"]) {
                    reject_unknown(w, "synth.words[].", {"name", "formants_hz", "bandwidths_hz"});
                    WordTemplate t;
                    t.name = w.at("name").get<std::string>();
                    if (w.contains("formants_hz")) {
                        auto v = w["formants_hz"].get<std::vector<double>>();
                        if (v.size() != 3)
                            throw DataError("config: word '" + t.name +
                                            "' needs exactly 3 formants");
                        std::copy(v.begin(), v.end(), t.formants_hz.begin());
                    }
                    if (w.contains("bandwidths_hz")) {
                        auto v = w["bandwidths_hz"].get<std::vector<double>>();
                        if (v.size() != 3)
                            throw DataError("config: word '" + t.name +
                                            "' needs exactly 3 bandwidths");
                        std::copy(v.begin(), v.end(), t.bandwidths_hz.begin());
                    }
                    cfg.synth.words.push_back(std::move(t));
                }
            }
            read_if(s, "speakers_per_group", cfg.synth.speakers_per_group);
            read_if(s, "utterances_per_speaker", cfg.synth.utterances_per_speaker);
            read_if(s, "formant_shift_hz", cfg.synth.formant_shift_hz);
            read_if(s, "speaker_jitter_hz", cfg.synth.speaker_jitter_hz);
            read_if(s, "utterance_jitter_hz", cfg.synth.utterance_jitter_hz);
            read_if(s, "duration_s", cfg.synth.duration_s);
            read_if(s, "noise_snr_db", cfg.synth.noise_snr_db);
        }
        if (j.contains("corpus")) {
            const auto& c = j["corpus"];
            reject_unknown(c, "corpus.", {"manifest"});
            read_if(c, "manifest", cfg.corpus_manifest);
        }
        if (j.contains("rescale")) {
            const auto& r = j["rescale"];
            reject_unknown(r, "rescale.", {"target_mu", "target_sigma"});
            read_if(r, "target_mu", cfg.rescale_target_mu);
            read_if(r, "target_sigma", cfg.rescale_target_sigma);
        }
        read_if(j, "output_dir", cfg.output_dir);
        read_if(j, "seed", cfg.seed);
    } catch (const json::exception& e) {
        throw DataError("config: " + path + ": " + e.what());
    }

    // resolve paths against the config file location
    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    resolve(cfg.corpus_manifest);
    resolve(cfg.output_dir);

    cfg.synth.seed = derive_seed(cfg.seed, hash_string("synth"));
    cfg.validate();
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["audio"] = {{"sample_rate_hz", cfg.audio.sample_rate_hz}};
    j["frame"] = {{"frame_len_ms", cfg.frame.frame_len_ms},
                  {"hop_ms", cfg.frame.hop_ms},
                  {"preemphasis", cfg.frame.preemphasis},
                  {"fft_size", cfg.frame.fft_size},
                  {"energy_floor", cfg.frame.energy_floor}};
    j["filterbank"] = {{"num_filters", cfg.num_filters},
                       {"normalization", to_string(cfg.normalization)}};
    j["hmm"] = {{"num_states", cfg.hmm.num_states},
                {"mixtures_per_state", cfg.hmm.mixtures_per_state},
                {"max_iters", cfg.hmm.max_iters},
                {"ll_tolerance", cfg.hmm.ll_tolerance},
                {"variance_floor_factor", cfg.hmm.variance_floor_factor}};
    j["loo"] = {{"num_folds", cfg.loo.num_folds}, {"outlier_filter", cfg.loo.outlier_filter}};
    j["search"] = {{"num_candidates", cfg.search.num_candidates},
                   {"stall_limit", cfg.search.stall_limit},
                   {"initial_radius", cfg.search.initial_radius},
                   {"max_iterations", cfg.search.max_iterations},
                   {"mu_init", cfg.search.mu_init}};
    json words = json::array();
    for (const auto& w : cfg.synth.words)
        words.push_back({{"name", w.name},
                         {"formants_hz", w.formants_hz},
                         {"bandwidths_hz", w.bandwidths_hz}});
    j["synth"] = {{"words", words},
                  {"speakers_per_group", cfg.synth.speakers_per_group},
                  {"utterances_per_speaker", cfg.synth.utterances_per_speaker},
                  {"formant_shift_hz", cfg.synth.formant_shift_hz},
                  {"speaker_jitter_hz", cfg.synth.speaker_jitter_hz},
                  {"utterance_jitter_hz", cfg.synth.utterance_jitter_hz},
                  {"duration_s", cfg.synth.duration_s},
                  {"noise_snr_db", cfg.synth.noise_snr_db}};
    j["corpus"] = {{"manifest", cfg.corpus_manifest}};
    j["rescale"] = {{"target_mu", cfg.rescale_target_mu},
                    {"target_sigma", cfg.rescale_target_sigma}};
    j["output_dir"] = cfg.output_dir;
    j["seed"] = cfg.seed;
    return j.dump(2);
}

}  // namespace afcc

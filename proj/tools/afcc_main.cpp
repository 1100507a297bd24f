#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "afcc/config.hpp"
#include "afcc/parallel.hpp"

namespace fs = std::filesystem;
using namespace afcc;

namespace {

struct ScaleChoice {
    WarpFunction warp;
    FilterbankNorm norm;
};

// Named fixed scales; mel and htk_mel carry their own filterbank
// normalization conventions (constant area vs constant height).
ScaleChoice make_scale(const std::string& name, const RunConfig& cfg) {
    if (name == "linear") return {WarpFunction::linear(cfg.audio), cfg.normalization};
    if (name == "mel") return {WarpFunction::mel_slaney(cfg.audio), FilterbankNorm::equal_area};
    if (name == "htk_mel")
        return {WarpFunction::mel_htk(cfg.audio), FilterbankNorm::equal_height};
    throw DataError("unknown scale '" + name + "' (expected linear, mel or htk_mel)");
}

std::ofstream open_out(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw DataError("cannot write " + p.string());
    return os;
}

void write_summary_csv(const fs::path& p, const std::string& word, const std::string& scale,
                       const ScaleEvalResult& r) {
    auto os = open_out(p);
    os.precision(17);
    os << "word,scale,rate,threshold,mu1,sigma1,n1,mu2,sigma2,n2\n";
    os << word << ',' << scale << ',' << r.rate << ',' << r.threshold << ','
       << r.fit_nonnative.mu << ',' << r.fit_nonnative.sigma << ',' << r.fit_nonnative.n << ','
       << r.fit_native.mu << ',' << r.fit_native.sigma << ',' << r.fit_native.n << '\n';
}

void write_eval_outputs(const fs::path& out_dir, const std::string& stem,
                        const std::string& word, const std::string& scale,
                        const ScaleEvalResult& r) {
    write_summary_csv(out_dir / (stem + ".csv"), word, scale, r);
    auto scores = open_out(out_dir / (stem + "_scores.csv"));
    write_scores_csv(r.scores, scores);
    auto dist = open_out(out_dir / (stem + "_dist.csv"));
    write_distribution_csv(r.scores, r.fit_nonnative, r.fit_native, 20, dist);
}

int cmd_synth(const RunConfig& cfg) {
    fs::path manifest_path(cfg.corpus_manifest);
    if (cfg.synth.formant_shift_hz == 0.0)
        std::cerr << "synth: formant shift is 0, generating a null-separation corpus\n";
    std::string written = synthesize_corpus(cfg.synth, cfg.audio,
                                            manifest_path.parent_path().string());
    if (fs::path(written) != manifest_path) fs::rename(written, manifest_path);
    std::cout << manifest_path.string() << '\n';
    return 0;
}

int cmd_extract(const RunConfig& cfg, const std::string& word, const std::string& scale_name) {
    Corpus corpus = load_corpus(cfg.corpus_manifest, cfg.audio);
    ScaleChoice scale = make_scale(scale_name, cfg);
    PreparedWord prep = prepare_word(corpus, word, cfg.pipeline());
    FilterbankConfig fbc{cfg.num_filters, scale.norm, scale.warp};
    Filterbank fb = build_filterbank(fbc, cfg.frame, cfg.audio);
    fs::path dir = fs::path(cfg.output_dir) / "features" / (word + "_" + scale_name);
    uint64_t cfg_hash = cfg.frame.hash(cfg.audio);
    for (size_t i = 0; i < prep.spectra.size(); ++i) {
        FeatureMatrix fm = cepstra_from_spectra(prep.spectra[i], fb, cfg.frame);
        std::string stem = fs::path(prep.sample_ids[i]).stem().string();
        auto csv = open_out(dir / (stem + ".csv"));
        write_features_csv(fm, csv);
        auto bin = open_out(dir / (stem + ".bin"));
        write_features_bin(fm, cfg_hash, bin);
    }
    std::cout << dir.string() << '\n';
    return 0;
}

int cmd_baseline(const RunConfig& cfg, const std::string& word, const std::string& scale_name) {
    Corpus corpus = load_corpus(cfg.corpus_manifest, cfg.audio);
    ScaleChoice scale = make_scale(scale_name, cfg);
    PipelineConfig pc = cfg.pipeline();
    PreparedWord prep = prepare_word(corpus, word, pc);
    ScaleEvalResult r =
        evaluate_warp(prep, scale.warp, scale.norm, pc, hash_string(scale_name));
    write_eval_outputs(cfg.output_dir, "baseline_" + word + "_" + scale_name, word, scale_name,
                       r);
    std::cout << word << ',' << scale_name << ": rate ";
    std::cout.precision(6);
    std::cout << r.rate << '\n';
    return 0;
}

int cmd_optimize(const RunConfig& cfg, const std::string& word) {
    Corpus corpus = load_corpus(cfg.corpus_manifest, cfg.audio);
    PipelineConfig pc = cfg.pipeline();
    PreparedWord prep = prepare_word(corpus, word, pc);
    Objective obj = make_objective(prep, pc);
    SearchResult res = optimize(obj, cfg.search, cfg.audio);

    fs::path out_dir(cfg.output_dir);
    auto trace = open_out(out_dir / ("optimize_" + word + "_trace.csv"));
    write_trace_csv(res.trace, trace);

    WarpFunction best = WarpFunction::pchp(res.best_point, cfg.audio);
    auto curve = open_out(out_dir / ("optimize_" + word + "_scale.csv"));
    write_warp_csv(best, 512, curve);

    // rerun the best point once so the score/distribution dumps exist
    ScaleEvalResult r =
        evaluate_warp(prep, best, pc.normalization, pc, point_hash(res.best_point));
    auto os = open_out(out_dir / ("optimize_" + word + ".csv"));
    os.precision(17);
    os << "word,scale,rate,threshold,mu1,sigma1,n1,mu2,sigma2,n2,x_hz,y_hz,truncated\n";
    os << word << ",adaptive," << res.best_rate << ',' << r.threshold << ','
       << r.fit_nonnative.mu << ',' << r.fit_nonnative.sigma << ',' << r.fit_nonnative.n << ','
       << r.fit_native.mu << ',' << r.fit_native.sigma << ',' << r.fit_native.n << ','
       << res.best_point.x << ',' << res.best_point.y << ',' << (res.truncated ? 1 : 0)
       << '\n';
    os.close();
    auto scores = open_out(out_dir / ("optimize_" + word + "_scores.csv"));
    write_scores_csv(r.scores, scores);
    auto dist = open_out(out_dir / ("optimize_" + word + "_dist.csv"));
    write_distribution_csv(r.scores, r.fit_nonnative, r.fit_native, 20, dist);

    std::cout.precision(6);
    std::cout << word << ",adaptive: rate " << res.best_rate << " at (" << res.best_point.x
              << ", " << res.best_point.y << ") Hz";
    if (res.truncated) std::cout << " [truncated at max_iterations]";
    std::cout << '\n';
    return 0;
}

// Rate cell read back verbatim so the table matches the per-run CSV byte for
// byte.
std::map<std::string, std::string> read_summary_row(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw DataError("report: cannot open " + p.string());
    std::string header, row;
    if (!std::getline(is, header) || !std::getline(is, row))
        throw DataError("report: " + p.string() + " is truncated");
    std::map<std::string, std::string> out;
    std::istringstream hs(header), rs(row);
    std::string h, v;
    while (std::getline(hs, h, ',')) {
        if (!std::getline(rs, v, ',')) v.clear();
        out[h] = v;
    }
    return out;
}

int cmd_report(const RunConfig& cfg) {
    fs::path out_dir(cfg.output_dir);
    if (!fs::exists(out_dir)) throw DataError("report: output dir " + out_dir.string() +
                                              " does not exist");
    // discover words from per-run summaries
    std::set<std::string> words;
    std::map<std::pair<std::string, std::string>, std::string> rates;  // (scale, word) -> rate
    for (const auto& entry : fs::directory_iterator(out_dir)) {
        std::string name = entry.path().filename().string();
        bool is_baseline = name.starts_with("baseline_") && name.ends_with(".csv");
        bool is_optimize = name.starts_with("optimize_") && name.ends_with(".csv");
        if (!is_baseline && !is_optimize) continue;
        if (name.ends_with("_scores.csv") || name.ends_with("_dist.csv") ||
            name.ends_with("_trace.csv") || name.ends_with("_scale.csv"))
            continue;
        auto row = read_summary_row(entry.path());
        if (!row.contains("word") || !row.contains("scale") || !row.contains("rate")) continue;
        words.insert(row["word"]);
        rates[{row["scale"], row["word"]}] = row["rate"];
    }
    if (words.empty()) throw DataError("report: no baseline or optimize runs in " +
                                       out_dir.string());

    const std::vector<std::string> scales = {"adaptive", "mel", "htk_mel", "linear"};
    std::vector<std::string> missing;
    for (const auto& w : words)
        for (const auto& s : scales)
            if (!rates.contains({s, w})) missing.push_back(s + " run for word '" + w + "'");
    if (!missing.empty()) {
        std::string msg = "report: missing";
        for (const auto& m : missing) msg += " " + m + ";";
        throw DataError(msg);
    }

    auto os = open_out(out_dir / "report.csv");
    os << "scale";
    for (const auto& w : words) os << ',' << w;
    os << '\n';
    for (const auto& s : scales) {
        os << s;
        for (const auto& w : words) os << ',' << rates[{s, w}];
        os << '\n';
    }
    std::cout << (out_dir / "report.csv").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive frequency cepstral coefficient pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string word;
    std::string scale = "mel";
    std::string out_override;
    uint64_t seed_override = 0;
    bool have_seed = false;
    int threads = 0;

    app.add_option("--threads", threads, "max worker threads (0 = auto, 1 = serial)");

    auto add_common = [&](CLI::App* sub, bool needs_word, bool needs_scale) {
        sub->add_option("--config", config_path, "run configuration JSON")->required();
        if (needs_word) sub->add_option("--word", word, "word to process")->required();
        if (needs_scale)
            sub->add_option("--scale", scale, "frequency scale: linear, mel, htk_mel");
        sub->add_option("--out", out_override, "override output directory");
        sub->add_option("--seed", seed_override, "override the global seed")
            ->each([&](const std::string&) { have_seed = true; });
    };

    auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
    add_common(synth, false, false);
    auto* extract = app.add_subcommand("extract", "write per-utterance features");
    add_common(extract, true, true);
    auto* baseline = app.add_subcommand("baseline", "evaluate one fixed frequency scale");
    add_common(baseline, true, true);
    auto* optimize_cmd = app.add_subcommand("optimize", "run the adaptive-scale search");
    add_common(optimize_cmd, true, false);
    auto* report = app.add_subcommand("report", "consolidate runs into one table");
    add_common(report, false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    parallel::set_max_threads(threads);

    try {
        RunConfig cfg = load_run_config(config_path);
        if (have_seed) {
            cfg.seed = seed_override;
            cfg.synth.seed = derive_seed(cfg.seed, hash_string("synth"));
        }
        if (!out_override.empty()) cfg.output_dir = out_override;

        if (synth->parsed()) return cmd_synth(cfg);
        if (extract->parsed()) return cmd_extract(cfg, word, scale);
        if (baseline->parsed()) return cmd_baseline(cfg, word, scale);
        if (optimize_cmd->parsed()) return cmd_optimize(cfg, word);
        if (report->parsed()) return cmd_report(cfg);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}

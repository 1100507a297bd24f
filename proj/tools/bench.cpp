// Serial-vs-OpenMP benchmark for the three hot kernels: spectrum
// precomputation, one full warp evaluation, and one search iteration's
// candidate sweep. The serial path is the reference; results must match
// bit for bit.

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "afcc/config.hpp"
#include "afcc/parallel.hpp"
#include "afcc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace afcc;

namespace {

double seconds(std::function<void()> fn) {
    auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void row(const std::string& name, double serial_s, double parallel_s, bool equal) {
    std::cout << std::left << std::setw(28) << name << std::right << std::fixed
              << std::setprecision(3) << std::setw(10) << serial_s << " s" << std::setw(10)
              << parallel_s << " s" << std::setw(9) << std::setprecision(2)
              << (parallel_s > 0 ? serial_s / parallel_s : 0.0) << "x   "
              << (equal ? "identical" : "MISMATCH") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    int speakers = argc > 1 ? std::atoi(argv[1]) : 8;
    int utterances = argc > 2 ? std::atoi(argv[2]) : 4;

    AudioConfig audio = AudioConfig::from_sample_rate(44100.0);
    fs::path dir = fs::temp_directory_path() / "afcc_bench";
    fs::remove_all(dir);

    SynthSpec spec;
    spec.words.push_back(WordTemplate{"a", {730.0, 1090.0, 2440.0}, {90.0, 110.0, 170.0}});
    spec.speakers_per_group = speakers;
    spec.utterances_per_speaker = utterances;
    spec.seed = 7;

    std::cout << "corpus: 2 x " << speakers << " speakers x " << utterances
              << " utterances, 0.5 s each\n";
    std::string manifest = synthesize_corpus(spec, audio, dir.string());
    Corpus corpus = load_corpus(manifest, audio);

    PipelineConfig pc;
    pc.audio = audio;
    pc.seed = 99;

    std::cout << std::left << std::setw(28) << "kernel" << std::right << std::setw(12)
              << "serial" << std::setw(12) << "openmp" << std::setw(10) << "speedup"
              << "   check\n";

    // 1. spectrum precomputation across utterances
    PreparedWord prep_serial, prep_parallel;
    parallel::set_max_threads(1);
    double t1s = seconds([&] { prep_serial = prepare_word(corpus, "a", pc); });
    parallel::set_max_threads(0);
    double t1p = seconds([&] { prep_parallel = prepare_word(corpus, "a", pc); });
    bool eq1 = true;
    for (size_t i = 0; i < prep_serial.spectra.size(); ++i)
        if (prep_serial.spectra[i].power != prep_parallel.spectra[i].power) eq1 = false;
    row("spectrum precompute", t1s, t1p, eq1);

    // 2. one full warp evaluation (filterbank -> cepstra -> LOO -> rate)
    WarpFunction mel = WarpFunction::mel_slaney(audio);
    ScaleEvalResult ev_serial, ev_parallel;
    parallel::set_max_threads(1);
    double t2s = seconds(
        [&] { ev_serial = evaluate_warp(prep_serial, mel, FilterbankNorm::equal_area, pc, 1); });
    parallel::set_max_threads(0);
    double t2p = seconds([&] {
        ev_parallel = evaluate_warp(prep_parallel, mel, FilterbankNorm::equal_area, pc, 1);
    });
    row("warp evaluation (LOO)", t2s, t2p, ev_serial.rate == ev_parallel.rate);

    // 3. one search iteration: 24 candidate evaluations
    SearchConfig scfg;
    Objective obj = make_objective(prep_serial, pc);
    SearchState st_serial = initialize(scfg, audio);
    SearchState st_parallel = initialize(scfg, audio);
    parallel::set_max_threads(1);
    double t3s = seconds([&] { step(st_serial, obj); });
    parallel::set_max_threads(0);
    double t3p = seconds([&] { step(st_parallel, obj); });
    bool eq3 = st_serial.trace[0].candidates.size() == st_parallel.trace[0].candidates.size();
    for (size_t i = 0; eq3 && i < st_serial.trace[0].candidates.size(); ++i)
        eq3 = st_serial.trace[0].candidates[i].rate == st_parallel.trace[0].candidates[i].rate;
    row("candidate sweep (M=24)", t3s, t3p, eq3);

    return (eq1 && ev_serial.rate == ev_parallel.rate && eq3) ? 0 : 1;
}

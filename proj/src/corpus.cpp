#include "afcc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "afcc/parallel.hpp"

namespace fs = std::filesystem;

namespace afcc {

void SynthSpec::validate(const AudioConfig& cfg) const {
    if (words.empty()) throw DataError("synth spec: no word templates");
    if (speakers_per_group < 1 || utterances_per_speaker < 1)
        throw DataError("synth spec: speaker and utterance counts must be positive");
    if (!(duration_s > 0.0)) throw DataError("synth spec: duration must be positive");
    if (formant_shift_hz < 0.0) throw DataError("synth spec: formant shift must be >= 0");
    for (const auto& w : words) {
        for (double f : w.formants_hz)
            if (!(f > 0.0) || f >= cfg.nyquist_hz)
                throw DataError("synth spec: word '" + w.name + "' formant " +
                                std::to_string(f) + " Hz not below Nyquist");
        if (w.formants_hz[1] + formant_shift_hz >= cfg.nyquist_hz)
            throw DataError("synth spec: word '" + w.name +
                            "' shifted formant exceeds Nyquist");
        for (double b : w.bandwidths_hz)
            if (!(b > 0.0)) throw DataError("synth spec: bandwidths must be positive");
    }
}

// ---- manifest ----

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CorpusManifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("manifest: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("manifest: empty file " + path);
    if (split_csv_line(line) != std::vector<std::string>{"path", "speaker", "word", "group",
                                                         "human_score"})
        throw DataError("manifest: bad header in " + path +
                        " (expected path,speaker,word,group,human_score)");
    CorpusManifest m;
    size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 5)
            throw DataError("manifest: row " + std::to_string(row) + " has " +
                            std::to_string(f.size()) + " fields, expected 5");
        ManifestEntry e;
        e.path = f[0];
        e.speaker = f[1];
        e.word = f[2];
        try {
            e.group = group_from_string(f[3]);
        } catch (const DataError& err) {
            throw DataError("manifest: row " + std::to_string(row) + ": " + err.what());
        }
        if (!f[4].empty()) {
            double hs = 0.0;
            try {
                hs = std::stod(f[4]);
            } catch (const std::exception&) {
                throw DataError("manifest: row " + std::to_string(row) +
                                ": bad human_score '" + f[4] + "'");
            }
            if (hs < 1.0 || hs > 7.0)
                throw DataError("manifest: row " + std::to_string(row) + ": human_score " +
                                f[4] + " outside [1, 7]");
            e.human_score = hs;
        }
        m.entries.push_back(std::move(e));
    }
    for (size_t i = 0; i < m.entries.size(); ++i)
        for (size_t j = i + 1; j < m.entries.size(); ++j)
            if (m.entries[i].path == m.entries[j].path)
                throw DataError("manifest: duplicate path " + m.entries[i].path);
    return m;
}

void write_manifest(const CorpusManifest& manifest, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("manifest: cannot write " + path);
    os << "path,speaker,word,group,human_score\n";
    os.precision(17);
    for (const auto& e : manifest.entries) {
        os << e.path << ',' << e.speaker << ',' << e.word << ',' << to_string(e.group) << ',';
        if (e.human_score) os << *e.human_score;
        os << '\n';
    }
}

// ---- WAV ----

namespace {

constexpr double kPcmScale = 32768.0;

template <class T>
void put_le(std::ofstream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

int16_t quantize_pcm16(double s) {
    double q = std::lround(s * 32767.0);
    return static_cast<int16_t>(std::clamp(q, -32768.0, 32767.0));
}

}  // namespace

void write_wav_pcm16(const std::string& path, std::span<const double> samples,
                     double sample_rate_hz) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("wav: cannot write " + path);
    uint32_t rate = static_cast<uint32_t>(sample_rate_hz);
    uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
    os.write("RIFF", 4);
    put_le<uint32_t>(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_le<uint32_t>(os, 16);
    put_le<uint16_t>(os, 1);  // PCM
    put_le<uint16_t>(os, 1);  // mono
    put_le<uint32_t>(os, rate);
    put_le<uint32_t>(os, rate * 2);
    put_le<uint16_t>(os, 2);
    put_le<uint16_t>(os, 16);
    os.write("data", 4);
    put_le<uint32_t>(os, data_bytes);
    for (double s : samples) put_le<uint16_t>(os, static_cast<uint16_t>(quantize_pcm16(s)));
    if (!os) throw DataError("wav: short write to " + path);
}

std::pair<std::vector<double>, double> read_wav_pcm16(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("wav: cannot open " + path);
    char tag[5] = {};
    is.read(tag, 4);
    if (std::strncmp(tag, "RIFF", 4) != 0) throw DataError("wav: " + path + " is not RIFF");
    get_le<uint32_t>(is);
    is.read(tag, 4);
    if (std::strncmp(tag, "WAVE", 4) != 0) throw DataError("wav: " + path + " is not WAVE");

    uint32_t rate = 0;
    uint16_t channels = 0, bits = 0, format = 0;
    std::vector<double> samples;
    bool got_fmt = false, got_data = false;
    while (is && !(got_fmt && got_data)) {
        is.read(tag, 4);
        if (!is) break;
        uint32_t size = get_le<uint32_t>(is);
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            format = get_le<uint16_t>(is);
            channels = get_le<uint16_t>(is);
            rate = get_le<uint32_t>(is);
            get_le<uint32_t>(is);
            get_le<uint16_t>(is);
            bits = get_le<uint16_t>(is);
            if (size > 16) is.ignore(size - 16);
            got_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            if (!got_fmt) throw DataError("wav: " + path + " has data before fmt");
            if (format != 1 || bits != 16 || channels != 1)
                throw DataError("wav: " + path +
                                " unsupported encoding (need PCM 16-bit mono)");
            size_t n = size / 2;
            samples.resize(n);
            for (size_t i = 0; i < n; ++i)
                samples[i] =
                    static_cast<int16_t>(get_le<uint16_t>(is)) / kPcmScale;
            got_data = true;
        } else {
            is.ignore(size);
        }
    }
    if (!got_fmt || !got_data) throw DataError("wav: " + path + " missing fmt or data chunk");
    return {std::move(samples), static_cast<double>(rate)};
}

Corpus load_corpus(const std::string& manifest_path, const AudioConfig& cfg) {
    cfg.validate();
    Corpus c;
    c.manifest = read_manifest(manifest_path);
    c.sample_rate_hz = cfg.sample_rate_hz;
    fs::path base = fs::path(manifest_path).parent_path();
    c.audio.resize(c.manifest.entries.size());
    for (size_t i = 0; i < c.manifest.entries.size(); ++i) {
        fs::path p = base / c.manifest.entries[i].path;
        if (!fs::exists(p)) throw DataError("corpus: missing audio file " + p.string());
        auto [samples, rate] = read_wav_pcm16(p.string());
        if (rate != cfg.sample_rate_hz)
            throw DataError("corpus: " + p.string() + " has sample rate " +
                            std::to_string(rate) + ", config expects " +
                            std::to_string(cfg.sample_rate_hz));
        c.audio[i] = std::move(samples);
    }
    return c;
}

// ---- synthesis ----

namespace {

// cascade of unit-peak-gain second-order resonators
std::vector<double> resonate(const std::vector<double>& excitation,
                             const std::array<double, 3>& formants,
                             const std::array<double, 3>& bandwidths, double fs) {
    std::vector<double> x = excitation;
    std::vector<double> y(x.size());
    for (int k = 0; k < 3; ++k) {
        double r = std::exp(-kPi * bandwidths[static_cast<size_t>(k)] / fs);
        double theta = 2.0 * kPi * formants[static_cast<size_t>(k)] / fs;
        double a1 = 2.0 * r * std::cos(theta);
        double a2 = -r * r;
        double b0 = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
        double y1 = 0.0, y2 = 0.0;
        for (size_t n = 0; n < x.size(); ++n) {
            double yn = b0 * x[n] + a1 * y1 + a2 * y2;
            y[n] = yn;
            y2 = y1;
            y1 = yn;
        }
        std::swap(x, y);
    }
    return x;
}

struct UtteranceParams {
    std::array<double, 3> formants;
    std::array<double, 3> bandwidths;
    double pitch_hz;
    double deviation_hz;  // |actual F2 - template F2|, drives the human score
};

}  // namespace

std::string synthesize_corpus(const SynthSpec& spec, const AudioConfig& cfg,
                              const std::string& out_dir) {
    cfg.validate();
    spec.validate(cfg);
    fs::create_directories(out_dir);

    CorpusManifest manifest;
    struct Job {
        ManifestEntry entry;
        UtteranceParams params;
    };
    std::vector<Job> jobs;

    for (const auto& word : spec.words) {
        for (int g = 0; g < 2; ++g) {
            Group group = g == 0 ? Group::native : Group::non_native;
            for (int s = 0; s < spec.speakers_per_group; ++s) {
                uint64_t speaker_seed = derive_seed(spec.seed, hash_string(word.name),
                                                    static_cast<uint64_t>(g),
                                                    static_cast<uint64_t>(s));
                Rng srng(speaker_seed);
                double pitch = srng.gauss(120.0, 10.0);
                pitch = std::clamp(pitch, 70.0, 250.0);
                std::array<double, 3> speaker_formants{};
                for (int k = 0; k < 3; ++k)
                    speaker_formants[static_cast<size_t>(k)] =
                        word.formants_hz[static_cast<size_t>(k)] +
                        srng.gauss(0.0, spec.speaker_jitter_hz);

                for (int u = 0; u < spec.utterances_per_speaker; ++u) {
                    uint64_t utt_seed = derive_seed(speaker_seed, hash_string("utt"),
                                                    static_cast<uint64_t>(u));
                    Rng urng(utt_seed);
                    UtteranceParams p;
                    p.pitch_hz = pitch;
                    p.bandwidths = word.bandwidths_hz;
                    for (int k = 0; k < 3; ++k)
                        p.formants[static_cast<size_t>(k)] =
                            speaker_formants[static_cast<size_t>(k)] +
                            urng.gauss(0.0, spec.utterance_jitter_hz);
                    if (group == Group::non_native)
                        p.formants[1] += spec.formant_shift_hz;
                    for (int k = 0; k < 3; ++k)
                        p.formants[static_cast<size_t>(k)] =
                            std::clamp(p.formants[static_cast<size_t>(k)], 60.0,
                                       0.95 * cfg.nyquist_hz);
                    p.deviation_hz = std::abs(p.formants[1] - word.formants_hz[1]);

                    char speaker_id[16], fname[64];
                    std::snprintf(speaker_id, sizeof speaker_id, "%s%02d",
                                  group == Group::native ? "nat" : "non", s + 1);
                    std::snprintf(fname, sizeof fname, "%s_%s_u%02d.wav", word.name.c_str(),
                                  speaker_id, u + 1);

                    double score =
                        1.0 + 6.0 * std::exp(-p.deviation_hz / 250.0) + urng.gauss(0.0, 0.3);
                    ManifestEntry e;
                    e.path = fname;
                    e.speaker = speaker_id;
                    e.word = word.name;
                    e.group = group;
                    e.human_score = std::clamp(score, 1.0, 7.0);
                    jobs.push_back({std::move(e), p});
                }
            }
        }
    }

    size_t n_samples = static_cast<size_t>(spec.duration_s * cfg.sample_rate_hz);
#pragma omp parallel for schedule(dynamic) num_threads(parallel::resolved_threads()) \
    if (!parallel::serial())
    for (long long jj = 0; jj < static_cast<long long>(jobs.size()); ++jj) {
        const Job& job = jobs[static_cast<size_t>(jj)];
        uint64_t noise_seed = derive_seed(spec.seed, hash_string("noise"),
                                          hash_string(job.entry.path));
        Rng nrng(noise_seed);

        std::vector<double> excitation(n_samples, 0.0);
        size_t period = static_cast<size_t>(
            std::max(1.0, std::round(cfg.sample_rate_hz / job.params.pitch_hz)));
        for (size_t i = 0; i < n_samples; i += period) excitation[i] = 1.0;

        std::vector<double> sig = resonate(excitation, job.params.formants,
                                           job.params.bandwidths, cfg.sample_rate_hz);
        double peak = 0.0;
        for (double v : sig) peak = std::max(peak, std::abs(v));
        if (peak > 0.0)
            for (double& v : sig) v *= 0.5 / peak;

        double sig_power = 0.0;
        for (double v : sig) sig_power += v * v;
        sig_power /= static_cast<double>(sig.size());
        double noise_power = sig_power / std::pow(10.0, spec.noise_snr_db / 10.0);
        double noise_std = std::sqrt(noise_power);
        for (double& v : sig) v += nrng.gauss(0.0, noise_std);

        // finalize through the 16-bit grid so in-memory and on-disk agree
        for (double& v : sig) v = quantize_pcm16(v) / kPcmScale;
        write_wav_pcm16((fs::path(out_dir) / job.entry.path).string(), sig,
                        cfg.sample_rate_hz);
    }

    manifest.entries.reserve(jobs.size());
    for (auto& job : jobs) manifest.entries.push_back(std::move(job.entry));
    std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
    write_manifest(manifest, manifest_path);
    return manifest_path;
}

}  // namespace afcc

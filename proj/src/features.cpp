#include "afcc/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "afcc/parallel.hpp"

namespace afcc {

namespace {

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a) {
    size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * kPi / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

const char* to_string(FilterbankNorm n) {
    return n == FilterbankNorm::equal_height ? "equal_height" : "equal_area";
}

size_t FrameConfig::frame_samples(const AudioConfig& cfg) const {
    return static_cast<size_t>(frame_len_ms * cfg.sample_rate_hz / 1000.0);
}

size_t FrameConfig::hop_samples(const AudioConfig& cfg) const {
    return static_cast<size_t>(hop_ms * cfg.sample_rate_hz / 1000.0);
}

size_t FrameConfig::effective_fft_size(const AudioConfig& cfg) const {
    return fft_size == 0 ? next_pow2(frame_samples(cfg)) : fft_size;
}

void FrameConfig::validate(const AudioConfig& cfg) const {
    cfg.validate();
    if (!(frame_len_ms > 0.0) || !(hop_ms > 0.0))
        throw DataError("frame config: frame and hop must be positive");
    if (hop_ms > frame_len_ms)
        throw DataError("frame config: hop_ms must not exceed frame_len_ms");
    if (!(preemphasis >= 0.0) || preemphasis >= 1.0)
        throw DataError("frame config: preemphasis must lie in [0, 1)");
    if (frame_samples(cfg) < 2) throw DataError("frame config: frame shorter than 2 samples");
    if (hop_samples(cfg) < 1) throw DataError("frame config: hop shorter than 1 sample");
    size_t n = effective_fft_size(cfg);
    if (n < frame_samples(cfg))
        throw DataError("frame config: fft_size smaller than one frame");
    if ((n & (n - 1)) != 0) throw DataError("frame config: fft_size must be a power of two");
    if (!(energy_floor > 0.0)) throw DataError("frame config: energy_floor must be positive");
}

uint64_t FrameConfig::hash(const AudioConfig& cfg) const {
    double fields[6] = {frame_len_ms, hop_ms, preemphasis,
                        static_cast<double>(effective_fft_size(cfg)), energy_floor,
                        cfg.sample_rate_hz};
    return hash_bytes(fields, sizeof fields);
}

Spectrogram frame_and_spectrum(std::span<const double> signal, const AudioConfig& cfg,
                               const FrameConfig& fc) {
    fc.validate(cfg);
    size_t frame_len = fc.frame_samples(cfg);
    size_t hop = fc.hop_samples(cfg);
    if (signal.size() < frame_len)
        throw DataError("frame_and_spectrum: signal shorter than one frame (" +
                        std::to_string(signal.size()) + " < " + std::to_string(frame_len) +
                        " samples)");
    size_t nfft = fc.effective_fft_size(cfg);
    size_t num_frames = (signal.size() - frame_len) / hop + 1;
    size_t num_bins = nfft / 2 + 1;

    std::vector<double> pre(signal.size());
    pre[0] = signal[0] * (1.0 - fc.preemphasis);
    for (size_t i = 1; i < signal.size(); ++i)
        pre[i] = signal[i] - fc.preemphasis * signal[i - 1];

    std::vector<double> window(frame_len);
    for (size_t i = 0; i < frame_len; ++i)
        window[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                           static_cast<double>(frame_len - 1));

    Spectrogram out;
    out.num_frames = num_frames;
    out.num_bins = num_bins;
    out.power.assign(num_frames * num_bins, 0.0);
    out.log_energy.assign(num_frames, 0.0);
    out.frame_times_s.assign(num_frames, 0.0);

#pragma omp parallel for schedule(static) num_threads(parallel::resolved_threads()) \
    if (!parallel::serial())
    for (long long tt = 0; tt < static_cast<long long>(num_frames); ++tt) {
        size_t t = static_cast<size_t>(tt);
        size_t start = t * hop;
        std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
        double energy = 0.0;
        for (size_t i = 0; i < frame_len; ++i) {
            double s = pre[start + i] * window[i];
            buf[i] = {s, 0.0};
            energy += s * s;
        }
        fft_radix2(buf);
        double* row = out.power.data() + t * num_bins;
        for (size_t k = 0; k < num_bins; ++k) row[k] = std::norm(buf[k]);
        out.log_energy[t] = std::log(std::max(energy, fc.energy_floor));
        out.frame_times_s[t] =
            (static_cast<double>(start) + static_cast<double>(frame_len) / 2.0) /
            cfg.sample_rate_hz;
    }
    return out;
}

Filterbank build_filterbank(const FilterbankConfig& fbc, const FrameConfig& fc,
                            const AudioConfig& cfg) {
    fc.validate(cfg);
    if (fbc.num_filters < 2) throw DataError("filterbank: num_filters must be >= 2");
    size_t nfft = fc.effective_fft_size(cfg);
    size_t num_bins = nfft / 2 + 1;
    double fn = cfg.nyquist_hz;

    Filterbank fb;
    fb.num_filters = fbc.num_filters;
    fb.num_bins = num_bins;
    fb.bin_hz = cfg.sample_rate_hz / static_cast<double>(nfft);
    fb.edge_freqs_hz.resize(static_cast<size_t>(fbc.num_filters) + 2);

    // edges uniform on the warped axis, pulled back via the inverse warp
    size_t num_edges = fb.edge_freqs_hz.size();
    fb.edge_freqs_hz.front() = 0.0;
    fb.edge_freqs_hz.back() = fn;
    for (size_t j = 1; j + 1 < num_edges; ++j) {
        double warped = fn * static_cast<double>(j) / static_cast<double>(num_edges - 1);
        fb.edge_freqs_hz[j] = fbc.warp.inverse(warped);
    }
    for (size_t j = 1; j < num_edges; ++j) {
        if (!(fb.edge_freqs_hz[j] > fb.edge_freqs_hz[j - 1]))
            throw NumericError("filterbank: edge frequencies not strictly increasing at edge " +
                               std::to_string(j));
    }

    // snap edges to their nearest FFT bin; triangles live on the bin grid so
    // the peak bin carries weight exactly 1 in equal_height mode
    std::vector<long> edge_bin(num_edges);
    for (size_t j = 0; j < num_edges; ++j) {
        long b = std::lround(fb.edge_freqs_hz[j] / fb.bin_hz);
        edge_bin[j] = std::clamp(b, 0L, static_cast<long>(num_bins) - 1);
    }

    fb.weights.assign(static_cast<size_t>(fbc.num_filters) * num_bins, 0.0);
    for (int j = 0; j < fbc.num_filters; ++j) {
        long b0 = edge_bin[static_cast<size_t>(j)];
        long b1 = edge_bin[static_cast<size_t>(j) + 1];
        long b2 = edge_bin[static_cast<size_t>(j) + 2];
        if (b1 <= b0 || b2 <= b1)
            throw NumericError("filterbank: filter " + std::to_string(j) +
                               " is degenerate (edges collapse onto the same FFT bin, bins " +
                               std::to_string(b0) + "/" + std::to_string(b1) + "/" +
                               std::to_string(b2) + ")");
        double* row = fb.weights.data() + static_cast<size_t>(j) * num_bins;
        double sum = 0.0;
        for (long k = b0 + 1; k <= b1; ++k) {
            row[k] = static_cast<double>(k - b0) / static_cast<double>(b1 - b0);
            sum += row[k];
        }
        for (long k = b1 + 1; k < b2; ++k) {
            row[k] = static_cast<double>(b2 - k) / static_cast<double>(b2 - b1);
            sum += row[k];
        }
        if (fbc.normalization == FilterbankNorm::equal_area) {
            double scale = 1.0 / (sum * fb.bin_hz);
            for (long k = b0 + 1; k < b2; ++k) row[k] *= scale;
        }
    }
    return fb;
}

std::vector<double> dct_matrix(int n) {
    if (n < 1) throw DataError("dct_matrix: size must be positive");
    std::vector<double> m(static_cast<size_t>(n) * static_cast<size_t>(n));
    double norm0 = std::sqrt(1.0 / n);
    double norm = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            m[static_cast<size_t>(k) * n + i] =
                (k == 0 ? norm0 : norm) *
                std::cos(kPi * k * (2.0 * i + 1.0) / (2.0 * n));
    return m;
}

FeatureMatrix cepstra_from_spectra(const Spectrogram& spec, const Filterbank& fb,
                                   const FrameConfig& fc) {
    if (spec.num_bins != fb.num_bins)
        throw DataError("cepstra: spectrogram and filterbank bin counts differ");
    if (fb.num_filters < FeatureMatrix::kDim)
        throw DataError("cepstra: need at least 13 filters to keep 12 cepstral coefficients");

    const int nf = fb.num_filters;
    std::vector<double> dct = dct_matrix(nf);

    FeatureMatrix out;
    out.num_frames = spec.num_frames;
    out.values.assign(spec.num_frames * FeatureMatrix::kDim, 0.0);
    out.frame_times_s = spec.frame_times_s;

    std::vector<double> loge(static_cast<size_t>(nf));
    for (size_t t = 0; t < spec.num_frames; ++t) {
        const double* p = spec.frame(t);
        for (int j = 0; j < nf; ++j) {
            const double* w = fb.row(j);
            double acc = 0.0;
            for (size_t k = 0; k < fb.num_bins; ++k) acc += w[k] * p[k];
            loge[static_cast<size_t>(j)] = std::log(std::max(acc, fc.energy_floor));
        }
        double* row = out.row(t);
        for (int c = 1; c <= 12; ++c) {
            const double* drow = dct.data() + static_cast<size_t>(c) * nf;
            double acc = 0.0;
            for (int j = 0; j < nf; ++j) acc += drow[j] * loge[static_cast<size_t>(j)];
            row[c - 1] = acc;
        }
        row[12] = spec.log_energy[t];
    }
    return out;
}

FeatureMatrix extract_features(std::span<const double> signal, const AudioConfig& cfg,
                               const FrameConfig& fc, const FilterbankConfig& fbc) {
    Spectrogram spec = frame_and_spectrum(signal, cfg, fc);
    Filterbank fb = build_filterbank(fbc, fc, cfg);
    return cepstra_from_spectra(spec, fb, fc);
}

void write_features_csv(const FeatureMatrix& fm, std::ostream& os) {
    os << "time_s";
    for (int c = 1; c <= 12; ++c) os << ",c" << c;
    os << ",log_energy\n";
    os.precision(17);
    for (size_t t = 0; t < fm.num_frames; ++t) {
        os << fm.frame_times_s[t];
        for (int d = 0; d < FeatureMatrix::kDim; ++d) os << ',' << fm.at(t, d);
        os << '\n';
    }
}

FeatureMatrix read_features_csv(std::istream& is) {
    FeatureMatrix fm;
    std::string line;
    if (!std::getline(is, line)) throw DataError("features csv: empty stream");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<double> vals;
        while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
        if (vals.size() != FeatureMatrix::kDim + 1)
            throw DataError("features csv: row with " + std::to_string(vals.size()) +
                            " fields, expected 14");
        fm.frame_times_s.push_back(vals[0]);
        fm.values.insert(fm.values.end(), vals.begin() + 1, vals.end());
        ++fm.num_frames;
    }
    return fm;
}

namespace {
constexpr uint32_t kFeatMagic = 0x43464141;  // "AAFC"
constexpr uint32_t kFeatVersion = 1;
}  // namespace

void write_features_bin(const FeatureMatrix& fm, uint64_t config_hash, std::ostream& os) {
    uint32_t dim = FeatureMatrix::kDim;
    uint64_t frames = fm.num_frames;
    os.write(reinterpret_cast<const char*>(&kFeatMagic), sizeof kFeatMagic);
    os.write(reinterpret_cast<const char*>(&kFeatVersion), sizeof kFeatVersion);
    os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    os.write(reinterpret_cast<const char*>(&frames), sizeof frames);
    os.write(reinterpret_cast<const char*>(&config_hash), sizeof config_hash);
    os.write(reinterpret_cast<const char*>(fm.frame_times_s.data()),
             static_cast<std::streamsize>(fm.num_frames * sizeof(double)));
    os.write(reinterpret_cast<const char*>(fm.values.data()),
             static_cast<std::streamsize>(fm.values.size() * sizeof(double)));
}

FeatureMatrix read_features_bin(std::istream& is, uint64_t* config_hash) {
    uint32_t magic = 0, version = 0, dim = 0;
    uint64_t frames = 0, hash = 0;
    is.read(reinterpret_cast<char*>(&magic), sizeof magic);
    is.read(reinterpret_cast<char*>(&version), sizeof version);
    is.read(reinterpret_cast<char*>(&dim), sizeof dim);
    is.read(reinterpret_cast<char*>(&frames), sizeof frames);
    is.read(reinterpret_cast<char*>(&hash), sizeof hash);
    if (!is || magic != kFeatMagic) throw DataError("features bin: bad magic");
    if (version != kFeatVersion) throw DataError("features bin: unsupported version");
    if (dim != FeatureMatrix::kDim) throw DataError("features bin: unexpected dimension");
    FeatureMatrix fm;
    fm.num_frames = frames;
    fm.frame_times_s.resize(frames);
    fm.values.resize(frames * FeatureMatrix::kDim);
    is.read(reinterpret_cast<char*>(fm.frame_times_s.data()),
            static_cast<std::streamsize>(frames * sizeof(double)));
    is.read(reinterpret_cast<char*>(fm.values.data()),
            static_cast<std::streamsize>(fm.values.size() * sizeof(double)));
    if (!is) throw DataError("features bin: truncated stream");
    if (config_hash) *config_hash = hash;
    return fm;
}

}  // namespace afcc

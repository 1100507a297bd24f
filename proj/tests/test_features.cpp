#include <doctest.h>

#include <cmath>
#include <complex>
#include <sstream>

#include "afcc/features.hpp"

using namespace afcc;

namespace {

const AudioConfig kCfg = AudioConfig::from_sample_rate(44100.0);

std::vector<double> sine(double freq_hz, double seconds, double amp = 1.0) {
    size_t n = static_cast<size_t>(seconds * kCfg.sample_rate_hz);
    std::vector<double> s(n);
    for (size_t i = 0; i < n; ++i)
        s[i] = amp * std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) /
                              kCfg.sample_rate_hz);
    return s;
}

// quadratic-time DFT power oracle for one windowed frame
std::vector<double> dft_power_oracle(const std::vector<double>& frame, size_t nfft) {
    size_t bins = nfft / 2 + 1;
    std::vector<double> p(bins, 0.0);
    for (size_t k = 0; k < bins; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t n = 0; n < frame.size(); ++n) {
            double ang = -2.0 * kPi * static_cast<double>(k * n) / static_cast<double>(nfft);
            acc += frame[n] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        p[k] = std::norm(acc);
    }
    return p;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("frame count matches the hop arithmetic") {
    FrameConfig fc;
    auto spec = frame_and_spectrum(std::vector<double>(44100, 0.1), kCfg, fc);
    // floor((44100 - 1102)/441) + 1
    CHECK(spec.num_frames == 98);
    CHECK(fc.frame_samples(kCfg) == 1102);
    CHECK(fc.hop_samples(kCfg) == 441);
    CHECK(fc.effective_fft_size(kCfg) == 2048);
}

TEST_CASE("too-short signal is an error") {
    FrameConfig fc;
    CHECK_THROWS_AS(frame_and_spectrum(std::vector<double>(500, 0.1), kCfg, fc), DataError);
}

TEST_CASE("pre-emphasis suppresses DC outside bin zero") {
    std::vector<double> dc(22050, 1.0);
    FrameConfig pre;
    FrameConfig raw;
    raw.preemphasis = 0.0;
    auto spec_pre = frame_and_spectrum(dc, kCfg, pre);
    auto spec_raw = frame_and_spectrum(dc, kCfg, raw);
    double dc_power = spec_raw.frame(0)[0];
    CHECK(dc_power > 1e5);
    for (size_t t = 0; t < spec_pre.num_frames; ++t) {
        const double* row = spec_pre.frame(t);
        // residual mainlobe bins are 1e-3 down, everything past it vanishes
        for (size_t k = 1; k < spec_pre.num_bins; ++k)
            CHECK(row[k] < 1e-3 * dc_power);
        for (size_t k = 8; k < spec_pre.num_bins; ++k)
            CHECK(row[k] < 1e-6 * dc_power);
    }
}

TEST_CASE("1 kHz sine peaks at the nearest bin in every frame") {
    FrameConfig fc;
    fc.preemphasis = 0.0;
    auto signal = sine(1000.0, 0.2);
    auto spec = frame_and_spectrum(signal, kCfg, fc);
    size_t nfft = fc.effective_fft_size(kCfg);
    size_t expected = static_cast<size_t>(std::lround(1000.0 * nfft / kCfg.sample_rate_hz));
    CHECK(expected == 46);
    for (size_t t = 0; t < spec.num_frames; ++t) {
        const double* row = spec.frame(t);
        size_t peak = 0;
        for (size_t k = 1; k < spec.num_bins; ++k)
            if (row[k] > row[peak]) peak = k;
        CHECK(peak == expected);
    }

    // cross-check one full frame against the direct DFT
    size_t L = fc.frame_samples(kCfg);
    std::vector<double> frame(L);
    for (size_t i = 0; i < L; ++i)
        frame[i] = signal[i] * (0.54 - 0.46 * std::cos(2.0 * kPi * i / (L - 1)));
    auto oracle = dft_power_oracle(frame, nfft);
    const double* row = spec.frame(0);
    for (size_t k = 0; k < spec.num_bins; ++k)
        CHECK(row[k] == doctest::Approx(oracle[k]).epsilon(1e-6).scale(1e-6));
}

TEST_CASE("dct matrix is orthonormal") {
    int n = 26;
    auto d = dct_matrix(n);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(static_cast<size_t>(n));
        for (auto& v : x) v = rng.gauss();
        // y = D x, z = D^T y should recover x
        std::vector<double> y(static_cast<size_t>(n), 0.0), z(static_cast<size_t>(n), 0.0);
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                y[static_cast<size_t>(k)] += d[static_cast<size_t>(k) * n + i] *
                                             x[static_cast<size_t>(i)];
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                z[static_cast<size_t>(i)] += d[static_cast<size_t>(k) * n + i] *
                                             y[static_cast<size_t>(k)];
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(z[static_cast<size_t>(i)] - x[static_cast<size_t>(i)]) < 1e-10);
    }
}

TEST_CASE("equal filterbank log-energies zero the cepstra") {
    // DCT rows 1.. are orthogonal to constants
    int n = 26;
    auto d = dct_matrix(n);
    for (int k = 1; k <= 12; ++k) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += d[static_cast<size_t>(k) * n + i];
        CHECK(std::abs(acc) < 1e-12);
    }
}

TEST_CASE("silence gives zero cepstra and the floor energy") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.warp = WarpFunction::mel_htk(kCfg);
    auto fm = extract_features(std::vector<double>(22050, 0.0), kCfg, fc, fbc);
    double floor_log = std::log(fc.energy_floor);
    for (size_t t = 0; t < fm.num_frames; ++t) {
        for (int c = 0; c < 12; ++c) CHECK(std::abs(fm.at(t, c)) < 1e-12);
        CHECK(fm.at(t, 12) == doctest::Approx(floor_log).epsilon(1e-12));
    }
}

TEST_CASE("linear equal-height filterbank") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.warp = WarpFunction::linear(kCfg);
    auto fb = build_filterbank(fbc, fc, kCfg);
    // uniform edges in Hz
    double spacing = kCfg.nyquist_hz / (fb.num_filters + 1);
    for (size_t j = 0; j < fb.edge_freqs_hz.size(); ++j)
        CHECK(fb.edge_freqs_hz[j] ==
              doctest::Approx(spacing * static_cast<double>(j)).epsilon(1e-9));
    // every row peaks at exactly 1
    for (int j = 0; j < fb.num_filters; ++j) {
        double mx = 0.0;
        for (size_t k = 0; k < fb.num_bins; ++k) mx = std::max(mx, fb.row(j)[k]);
        CHECK(mx == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("equal-area rows integrate to one") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.normalization = FilterbankNorm::equal_area;
    fbc.warp = WarpFunction::linear(kCfg);
    auto fb = build_filterbank(fbc, fc, kCfg);
    for (int j = 0; j < fb.num_filters; ++j) {
        double sum = 0.0;
        for (size_t k = 0; k < fb.num_bins; ++k) sum += fb.row(j)[k];
        CHECK(sum * fb.bin_hz == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("mel filterbank edges widen with frequency") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.warp = WarpFunction::mel_htk(kCfg);
    auto fb = build_filterbank(fbc, fc, kCfg);
    for (size_t j = 2; j < fb.edge_freqs_hz.size(); ++j)
        CHECK(fb.edge_freqs_hz[j] - fb.edge_freqs_hz[j - 1] >
              fb.edge_freqs_hz[j - 1] - fb.edge_freqs_hz[j - 2]);
}

TEST_CASE("filterbank rows are unimodal with contiguous support") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.warp = WarpFunction::pchp({5000.0, 15000.0}, kCfg);
    auto fb = build_filterbank(fbc, fc, kCfg);
    for (int j = 0; j < fb.num_filters; ++j) {
        const double* row = fb.row(j);
        size_t first = fb.num_bins, last = 0;
        for (size_t k = 0; k < fb.num_bins; ++k)
            if (row[k] > 0.0) {
                first = std::min(first, k);
                last = k;
            }
        REQUIRE(first <= last);
        for (size_t k = first; k <= last; ++k) CHECK(row[k] > 0.0);
        // single peak: increases then decreases
        size_t peak = first;
        for (size_t k = first; k <= last; ++k)
            if (row[k] > row[peak]) peak = k;
        for (size_t k = first; k < peak; ++k) CHECK(row[k] <= row[k + 1]);
        for (size_t k = peak; k < last; ++k) CHECK(row[k] >= row[k + 1]);
    }
    // adjacent triangles overlap: all covered bins positive in some filter
    size_t lo_bin = static_cast<size_t>(std::lround(fb.edge_freqs_hz[1] / fb.bin_hz));
    size_t hi_bin = static_cast<size_t>(
        std::lround(fb.edge_freqs_hz[fb.edge_freqs_hz.size() - 2] / fb.bin_hz));
    for (size_t k = lo_bin; k <= hi_bin; ++k) {
        double cover = 0.0;
        for (int j = 0; j < fb.num_filters; ++j) cover += fb.row(j)[k];
        CHECK(cover > 0.0);
    }
}

TEST_CASE("extreme warp collapses edges into a degenerate filter") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.warp = WarpFunction::pchp({25.0, 22000.0}, kCfg);
    CHECK_THROWS_AS(build_filterbank(fbc, fc, kCfg), NumericError);
    try {
        build_filterbank(fbc, fc, kCfg);
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("filter") != std::string::npos);
    }
}

TEST_CASE("knot changes move filterbank edges") {
    FrameConfig fc;
    FilterbankConfig a, b;
    a.warp = WarpFunction::pchp({6000.0, 12000.0}, kCfg);
    b.warp = WarpFunction::pchp({6150.0, 12000.0}, kCfg);
    auto fba = build_filterbank(a, fc, kCfg);
    auto fbb = build_filterbank(b, fc, kCfg);
    long moved = 0;
    for (size_t j = 0; j < fba.edge_freqs_hz.size(); ++j) {
        long bin_a = std::lround(fba.edge_freqs_hz[j] / fba.bin_hz);
        long bin_b = std::lround(fbb.edge_freqs_hz[j] / fbb.bin_hz);
        moved = std::max(moved, std::labs(bin_a - bin_b));
    }
    CHECK(moved >= 1);
}

TEST_CASE("diagonal pchp features equal linear features") {
    FrameConfig fc;
    auto signal = sine(800.0, 0.3, 0.4);
    FilterbankConfig lin, diag;
    lin.warp = WarpFunction::linear(kCfg);
    diag.warp = WarpFunction::pchp({11025.0, 11025.0}, kCfg);
    auto fa = extract_features(signal, kCfg, fc, lin);
    auto fb = extract_features(signal, kCfg, fc, diag);
    REQUIRE(fa.num_frames == fb.num_frames);
    for (size_t i = 0; i < fa.values.size(); ++i)
        CHECK(std::abs(fa.values[i] - fb.values[i]) < 1e-9);
}

TEST_CASE("extraction is deterministic") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.warp = WarpFunction::mel_slaney(kCfg);
    fbc.normalization = FilterbankNorm::equal_area;
    auto signal = sine(440.0, 0.25, 0.7);
    auto fa = extract_features(signal, kCfg, fc, fbc);
    auto fb = extract_features(signal, kCfg, fc, fbc);
    CHECK(fa.values == fb.values);
    CHECK(fa.frame_times_s == fb.frame_times_s);
}

TEST_CASE("csv and binary round trips") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.warp = WarpFunction::mel_htk(kCfg);
    auto fm = extract_features(sine(600.0, 0.12, 0.5), kCfg, fc, fbc);

    std::stringstream bin;
    write_features_bin(fm, fc.hash(kCfg), bin);
    uint64_t hash = 0;
    auto back = read_features_bin(bin, &hash);
    CHECK(hash == fc.hash(kCfg));
    CHECK(back.values == fm.values);  // bit-exact
    CHECK(back.frame_times_s == fm.frame_times_s);

    std::stringstream csv;
    write_features_csv(fm, csv);
    auto parsed = read_features_csv(csv);
    REQUIRE(parsed.num_frames == fm.num_frames);
    for (size_t i = 0; i < fm.values.size(); ++i)
        CHECK(parsed.values[i] == doctest::Approx(fm.values[i]).epsilon(1e-15));
}

TEST_CASE("too few filters for 12 cepstra is an error") {
    FrameConfig fc;
    FilterbankConfig fbc;
    fbc.num_filters = 8;
    fbc.warp = WarpFunction::linear(kCfg);
    auto spec = frame_and_spectrum(sine(500.0, 0.1), kCfg, fc);
    auto fb = build_filterbank(fbc, fc, kCfg);
    CHECK_THROWS_AS(cepstra_from_spectra(spec, fb, fc), DataError);
}

}  // TEST_SUITE

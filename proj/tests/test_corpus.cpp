#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "afcc/corpus.hpp"

namespace fs = std::filesystem;
using namespace afcc;

namespace {

const AudioConfig kCfg = AudioConfig::from_sample_rate(44100.0);

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("afcc_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

SynthSpec tiny_spec(uint64_t seed) {
    SynthSpec spec;
    spec.words.push_back(WordTemplate{"a", {730.0, 1090.0, 2440.0}, {90.0, 110.0, 170.0}});
    spec.speakers_per_group = 2;
    spec.utterances_per_speaker = 2;
    spec.duration_s = 0.2;
    spec.seed = seed;
    return spec;
}

uint64_t hash_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    std::ostringstream ss;
    ss << is.rdbuf();
    std::string s = ss.str();
    return hash_bytes(s.data(), s.size());
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("wav round trip is exact after quantization") {
    fs::path dir = temp_dir("wav");
    std::vector<double> samples;
    Rng rng(5);
    for (int i = 0; i < 4000; ++i) samples.push_back(rng.uniform(-1.0, 1.0));
    samples[0] = -1.0;
    samples[1] = 0.999969482421875;  // 32767/32768
    samples[2] = 0.0;

    std::vector<double> quantized(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        double q = std::round(samples[i] * 32767.0);
        quantized[i] = std::clamp(q, -32768.0, 32767.0) / 32768.0;
    }

    fs::path wav = dir / "t.wav";
    write_wav_pcm16(wav.string(), samples, 44100.0);
    auto [back, rate] = read_wav_pcm16(wav.string());
    CHECK(rate == 44100.0);
    REQUIRE(back.size() == samples.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == quantized[i]);
}

TEST_CASE("manifest round trip and validation") {
    fs::path dir = temp_dir("manifest");
    CorpusManifest m;
    m.entries.push_back({"a.wav", "s1", "tres", Group::native, 6.5});
    m.entries.push_back({"b.wav", "s2", "tres", Group::non_native, std::nullopt});
    fs::path mp = dir / "manifest.csv";
    write_manifest(m, mp.string());
    CorpusManifest back = read_manifest(mp.string());
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].speaker == "s1");
    CHECK(back.entries[0].group == Group::native);
    CHECK(back.entries[0].human_score.value() == doctest::Approx(6.5));
    CHECK_FALSE(back.entries[1].human_score.has_value());

    std::ofstream bad(dir / "bad.csv");
    bad << "path,speaker,word,group,human_score\n";
    bad << "x.wav,s1,tres,weird_group,\n";
    bad.close();
    CHECK_THROWS_AS(read_manifest((dir / "bad.csv").string()), DataError);

    std::ofstream bad2(dir / "bad2.csv");
    bad2 << "path,speaker,word\n";
    bad2.close();
    CHECK_THROWS_AS(read_manifest((dir / "bad2.csv").string()), DataError);

    std::ofstream bad3(dir / "bad3.csv");
    bad3 << "path,speaker,word,group,human_score\n";
    bad3 << "x.wav,s1,tres,native,9.5\n";
    bad3.close();
    CHECK_THROWS_AS(read_manifest((dir / "bad3.csv").string()), DataError);
}

TEST_CASE("loading a missing wav names the path") {
    fs::path dir = temp_dir("missing");
    CorpusManifest m;
    m.entries.push_back({"ghost.wav", "s1", "a", Group::native, std::nullopt});
    fs::path mp = dir / "manifest.csv";
    write_manifest(m, mp.string());
    try {
        load_corpus(mp.string(), kCfg);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("ghost.wav") != std::string::npos);
    }
}

TEST_CASE("sample rate mismatches are rejected") {
    fs::path dir = temp_dir("rate");
    std::vector<double> samples(1000, 0.1);
    write_wav_pcm16((dir / "w.wav").string(), samples, 22050.0);
    CorpusManifest m;
    m.entries.push_back({"w.wav", "s1", "a", Group::native, std::nullopt});
    write_manifest(m, (dir / "manifest.csv").string());
    CHECK_THROWS_AS(load_corpus((dir / "manifest.csv").string(), kCfg), DataError);
}

TEST_CASE("synthesis generates a balanced, loadable corpus") {
    fs::path dir = temp_dir("synth");
    SynthSpec spec = tiny_spec(404);
    spec.duration_s = 0.5;
    std::string manifest = synthesize_corpus(spec, kCfg, dir.string());
    Corpus corpus = load_corpus(manifest, kCfg);

    REQUIRE(corpus.manifest.entries.size() == 8);  // 2 groups x 2 speakers x 2 utts
    int natives = 0;
    for (const auto& e : corpus.manifest.entries) {
        if (e.group == Group::native) ++natives;
        CHECK(e.word == "a");
        CHECK(e.human_score.has_value());
    }
    CHECK(natives == 4);
    for (const auto& audio : corpus.audio) {
        CHECK(audio.size() == 22050);  // 0.5 s at 44.1 kHz
        for (double v : audio) {
            CHECK(v >= -1.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("synthetic human scores separate the groups") {
    fs::path dir = temp_dir("scores");
    SynthSpec spec = tiny_spec(77);
    spec.speakers_per_group = 4;
    std::string manifest = synthesize_corpus(spec, kCfg, dir.string());
    CorpusManifest m = read_manifest(manifest);
    double mean[2] = {0.0, 0.0};
    int n[2] = {0, 0};
    for (const auto& e : m.entries) {
        int g = e.group == Group::native ? 1 : 0;
        mean[g] += e.human_score.value();
        ++n[g];
    }
    CHECK(mean[1] / n[1] > mean[0] / n[0]);
}

TEST_CASE("equal seeds give byte-identical corpora") {
    fs::path dir_a = temp_dir("det_a");
    fs::path dir_b = temp_dir("det_b");
    SynthSpec spec = tiny_spec(2024);
    synthesize_corpus(spec, kCfg, dir_a.string());
    synthesize_corpus(spec, kCfg, dir_b.string());
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        fs::path other = dir_b / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(hash_file(entry.path()) == hash_file(other));
    }
}

TEST_CASE("synthesized audio survives the disk round trip unchanged") {
    fs::path dir = temp_dir("roundtrip");
    SynthSpec spec = tiny_spec(999);
    std::string manifest = synthesize_corpus(spec, kCfg, dir.string());
    Corpus c1 = load_corpus(manifest, kCfg);
    // write what we loaded and reload; quantization already happened
    for (size_t i = 0; i < c1.audio.size(); ++i) {
        fs::path p = dir / ("rt_" + std::to_string(i) + ".wav");
        write_wav_pcm16(p.string(), c1.audio[i], kCfg.sample_rate_hz);
        auto [back, rate] = read_wav_pcm16(p.string());
        CHECK(back == c1.audio[i]);
    }
}

TEST_CASE("formants above nyquist are rejected") {
    SynthSpec spec = tiny_spec(1);
    spec.words[0].formants_hz[2] = 23000.0;
    CHECK_THROWS_AS(spec.validate(kCfg), DataError);
    SynthSpec spec2 = tiny_spec(1);
    spec2.words[0].formants_hz[1] = 21900.0;  // shift pushes it over
    CHECK_THROWS_AS(spec2.validate(kCfg), DataError);
}

}  // TEST_SUITE

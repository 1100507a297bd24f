#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "afcc/eval.hpp"

using namespace afcc;

namespace {

constexpr int kD = FeatureMatrix::kDim;

FeatureMatrix gaussian_sample(Rng& rng, double center, size_t frames = 12) {
    FeatureMatrix fm;
    fm.num_frames = frames;
    fm.values.resize(frames * kD);
    for (auto& v : fm.values) v = rng.gauss(center, 0.5);
    fm.frame_times_s.assign(frames, 0.0);
    return fm;
}

std::vector<LooSample> toy_corpus(int natives, int nonnatives, uint64_t seed,
                                  int samples_per_speaker = 1) {
    Rng rng(seed);
    std::vector<LooSample> corpus;
    for (int i = 0; i < natives; ++i) {
        LooSample s;
        s.sample_id = "nat" + std::to_string(i);
        s.speaker = "spk_n" + std::to_string(i / samples_per_speaker);
        s.group = Group::native;
        s.features = gaussian_sample(rng, 0.0);
        corpus.push_back(std::move(s));
    }
    for (int i = 0; i < nonnatives; ++i) {
        LooSample s;
        s.sample_id = "non" + std::to_string(i);
        s.speaker = "spk_f" + std::to_string(i / samples_per_speaker);
        s.group = Group::non_native;
        s.features = gaussian_sample(rng, 1.5);
        corpus.push_back(std::move(s));
    }
    return corpus;
}

double gaussian_pdf(double x, double mu, double sigma) {
    double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * kPi));
}

ScoreSet random_scores(Rng& rng, int n_per_group) {
    ScoreSet s;
    for (int i = 0; i < n_per_group; ++i) {
        s.entries.push_back({"a" + std::to_string(i), Group::non_native, rng.gauss(-1.0, 0.8),
                             0.0});
        s.entries.push_back({"b" + std::to_string(i), Group::native, rng.gauss(1.0, 1.2), 0.0});
    }
    return s;
}

double rate_of(const ScoreSet& s) {
    auto [g1, g2] = fit_groups(s);
    return classification_rate(g1, g2).rate;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("two-point rescale") {
    ScoreSet s;
    s.entries.push_back({"x", Group::non_native, 0.0, 0.0});
    s.entries.push_back({"y", Group::native, 2.0, 0.0});
    ScoreSet r = rescale(s, 4.0, 1.0);
    CHECK(r.entries[0].rescaled == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.entries[1].rescaled == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("rescaling to own moments is the identity") {
    Rng rng(1);
    ScoreSet s = random_scores(rng, 20);
    double mean = 0.0;
    for (const auto& e : s.entries) mean += e.raw;
    mean /= static_cast<double>(s.entries.size());
    double var = 0.0;
    for (const auto& e : s.entries) var += (e.raw - mean) * (e.raw - mean);
    var /= static_cast<double>(s.entries.size());
    ScoreSet r = rescale(s, mean, std::sqrt(var));
    for (size_t i = 0; i < s.entries.size(); ++i)
        CHECK(r.entries[i].rescaled == doctest::Approx(s.entries[i].raw).epsilon(1e-12));
}

TEST_CASE("zero pooled variance is degenerate") {
    ScoreSet s;
    s.entries.push_back({"x", Group::non_native, 1.0, 0.0});
    s.entries.push_back({"y", Group::native, 1.0, 0.0});
    CHECK_THROWS_AS(rescale(s, 4.0, 1.0), NumericError);
}

TEST_CASE("identical groups give rate one half") {
    auto r = classification_rate({0.0, 1.0, 10}, {0.0, 1.0, 10});
    CHECK(r.rate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.threshold == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("equal-variance pair hits the closed form") {
    auto r = classification_rate({0.0, 1.0, 10}, {2.0, 1.0, 10});
    CHECK(r.threshold == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.rate == doctest::Approx(0.8413447460685429).epsilon(1e-12));
}

TEST_CASE("unequal-variance pair matches the quadratic root") {
    auto r = classification_rate({0.0, 1.0, 10}, {3.0, 2.0, 10});
    // root of 3x^2 + 6x - (9 + 8 ln 2) = 0 inside [0, 3]
    double root = (-6.0 + std::sqrt(36.0 + 12.0 * (9.0 + 8.0 * std::log(2.0)))) / 6.0;
    CHECK(r.threshold == doctest::Approx(root).epsilon(1e-12));
    CHECK(r.threshold == doctest::Approx(1.4183449881051271).epsilon(1e-10));
    double expect = 1.0 - 0.5 * ((1.0 - normal_cdf(root)) + normal_cdf((root - 3.0) / 2.0));
    CHECK(r.rate == doctest::Approx(expect).epsilon(1e-12));
    CHECK(r.rate == doctest::Approx(0.853716318809797).epsilon(1e-10));
}

TEST_CASE("threshold zeroes the discriminant") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        double mu1 = rng.gauss(0.0, 2.0);
        double s1 = rng.uniform(0.5, 1.6);
        double s2 = rng.uniform(0.5, 1.6);
        // wide enough separation that the crossing sits between the means
        double mu2 = mu1 + rng.uniform(2.5, 5.0);
        auto r = classification_rate({mu1, s1, 10}, {mu2, s2, 10});
        double g = 0.5 * gaussian_pdf(r.threshold, mu1, s1) -
                   0.5 * gaussian_pdf(r.threshold, mu2, s2);
        CHECK(std::abs(g) < 1e-10);
        CHECK(r.threshold >= mu1 - 1e-9);
        CHECK(r.threshold <= mu2 + 1e-9);
    }
}

TEST_CASE("near-coincident groups stay close to chance") {
    // no crossing between the means here; the rate is the best single
    // threshold's and must sit just above one half
    auto r = classification_rate({0.0, 1.05, 200}, {0.08, 0.95, 200});
    CHECK(r.rate >= 0.5);
    CHECK(r.rate < 0.56);
    double g = 0.5 * gaussian_pdf(r.threshold, 0.0, 1.05) -
               0.5 * gaussian_pdf(r.threshold, 0.08, 0.95);
    CHECK(std::abs(g) < 1e-10);
    auto eq = classification_rate({0.0, 1.0, 200}, {0.0, 1.3, 200});
    CHECK(eq.rate >= 0.5);
    CHECK(eq.rate < 0.6);
}

TEST_CASE("orientation violations are rejected") {
    CHECK_THROWS_AS(classification_rate({2.0, 1.0, 10}, {0.0, 1.0, 10}), NumericError);
    CHECK_THROWS_AS(classification_rate({0.0, 0.0, 10}, {1.0, 1.0, 10}), NumericError);
}

TEST_CASE("rate is symmetric under group swap with axis negation") {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        double mu1 = rng.gauss(0.0, 1.0);
        double mu2 = mu1 + rng.uniform(0.2, 3.0);
        double s1 = rng.uniform(0.4, 1.8);
        double s2 = rng.uniform(0.4, 1.8);
        double a = classification_rate({mu1, s1, 10}, {mu2, s2, 10}).rate;
        double b = classification_rate({-mu2, s2, 10}, {-mu1, s1, 10}).rate;
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("separation growth never lowers the rate") {
    double prev = 0.0;
    for (int i = 0; i <= 40; ++i) {
        double gap = 0.1 * i;
        double r = classification_rate({0.0, 1.0, 10}, {gap, 1.3, 10}).rate;
        CHECK(r >= prev - 1e-12);
        prev = r;
    }
}

TEST_CASE("group fits use unbiased standard deviation") {
    ScoreSet s;
    s.entries.push_back({"a", Group::non_native, 0.0, 1.0});
    s.entries.push_back({"b", Group::non_native, 0.0, 3.0});
    s.entries.push_back({"c", Group::native, 0.0, 5.0});
    s.entries.push_back({"d", Group::native, 0.0, 7.0});
    auto [g1, g2] = fit_groups(s);
    CHECK(g1.mu == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(g1.sigma == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(g2.mu == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(g1.n == 2);
}

TEST_CASE("single-group score sets are degenerate") {
    ScoreSet s;
    s.entries.push_back({"a", Group::native, 0.0, 1.0});
    s.entries.push_back({"b", Group::native, 0.0, 2.0});
    CHECK_THROWS_AS(fit_groups(s), NumericError);
}

TEST_CASE("fits recover seeded draws") {
    Rng rng(321);
    ScoreSet s;
    for (int i = 0; i < 1000; ++i) {
        s.entries.push_back({"n" + std::to_string(i), Group::native, 0.0, rng.gauss(4.0, 1.0)});
        s.entries.push_back(
            {"f" + std::to_string(i), Group::non_native, 0.0, rng.gauss(2.0, 1.0)});
    }
    auto [g1, g2] = fit_groups(s);
    CHECK(std::abs(g2.mu - 4.0) < 0.1);
    CHECK(std::abs(g2.sigma - 1.0) < 0.1);
    CHECK(std::abs(g1.mu - 2.0) < 0.1);
}

TEST_CASE("rate is invariant under rescaling") {
    Rng rng(2718);
    for (int trial = 0; trial < 20; ++trial) {
        ScoreSet s = random_scores(rng, 30);
        for (auto& e : s.entries) e.rescaled = e.raw;
        double before = rate_of(s);
        ScoreSet r = rescale(s, rng.uniform(1.0, 7.0), rng.uniform(0.25, 4.0));
        double after = rate_of(r);
        CHECK(before == doctest::Approx(after).epsilon(1e-12));
    }
}

TEST_CASE("loo folds follow the 80/20 split") {
    auto corpus = toy_corpus(10, 4, 42);
    LooConfig cfg;
    cfg.seed = 9;
    HmmConfig hmm_cfg;
    LooResult r = run_loo(corpus, cfg, hmm_cfg);
    REQUIRE(r.folds.size() == 5);
    for (const auto& f : r.folds) CHECK(f.size() == 2);  // train 8, test 2
    CHECK(r.scores.entries.size() == 14);
    std::set<std::string> seen;
    for (const auto& e : r.scores.entries) CHECK(seen.insert(e.sample_id).second);
}

TEST_CASE("loo is deterministic") {
    auto corpus = toy_corpus(10, 3, 7);
    LooConfig cfg;
    cfg.seed = 1234;
    HmmConfig hmm_cfg;
    LooResult a = run_loo(corpus, cfg, hmm_cfg);
    LooResult b = run_loo(corpus, cfg, hmm_cfg);
    REQUIRE(a.scores.entries.size() == b.scores.entries.size());
    for (size_t i = 0; i < a.scores.entries.size(); ++i) {
        CHECK(a.scores.entries[i].sample_id == b.scores.entries[i].sample_id);
        CHECK(a.scores.entries[i].raw == b.scores.entries[i].raw);  // bit-exact
    }
    CHECK(a.folds == b.folds);
}

TEST_CASE("non-native raw score is the fold average") {
    auto corpus = toy_corpus(10, 3, 77);
    LooConfig cfg;
    HmmConfig hmm_cfg;
    LooResult r = run_loo(corpus, cfg, hmm_cfg);
    for (size_t k = 0; k < r.nonnative_ids.size(); ++k) {
        double mean = 0.0;
        for (double v : r.nonnative_fold_scores[k]) mean += v;
        mean /= static_cast<double>(r.nonnative_fold_scores[k].size());
        double raw = 0.0;
        for (const auto& e : r.scores.entries)
            if (e.sample_id == r.nonnative_ids[k]) raw = e.raw;
        CHECK(raw == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("speakers never straddle folds") {
    auto corpus = toy_corpus(20, 4, 5, /*samples_per_speaker=*/2);
    LooConfig cfg;
    cfg.seed = 31;
    HmmConfig hmm_cfg;
    LooResult r = run_loo(corpus, cfg, hmm_cfg);
    std::map<std::string, std::set<size_t>> speaker_folds;
    for (size_t f = 0; f < r.folds.size(); ++f)
        for (const auto& id : r.folds[f])
            for (const auto& s : corpus)
                if (s.sample_id == id) speaker_folds[s.speaker].insert(f);
    for (const auto& [spk, folds] : speaker_folds) CHECK(folds.size() == 1);
}

TEST_CASE("insufficient samples raise protocol errors") {
    LooConfig cfg;
    HmmConfig hmm_cfg;
    auto few_natives = toy_corpus(3, 2, 1);
    CHECK_THROWS_AS(run_loo(few_natives, cfg, hmm_cfg), ProtocolError);
    auto no_nonnative = toy_corpus(10, 0, 1);
    CHECK_THROWS_AS(run_loo(no_nonnative, cfg, hmm_cfg), ProtocolError);
}

TEST_CASE("outlier filter drops cross-group scores") {
    std::vector<Group> groups = {Group::native, Group::native, Group::native,
                                 Group::non_native, Group::non_native, Group::non_native};
    std::vector<double> hs = {6.0, 6.5, 2.6, 2.0, 2.5, 6.2};
    auto keep = filter_outliers(groups, hs);
    // native scored 2.6 sits nearer the non-native mean; non-native 6.2 nearer native
    CHECK(keep == std::vector<size_t>{0, 1, 3, 4});
}

TEST_CASE("score and distribution exports are well formed") {
    Rng rng(12);
    ScoreSet s = random_scores(rng, 25);
    ScoreSet r = rescale(s, 4.0, 1.0);
    auto [g1, g2] = fit_groups(r);
    std::ostringstream scores_csv;
    write_scores_csv(r, scores_csv);
    CHECK(scores_csv.str().starts_with("sample_id,group,raw_score,rescaled_score\n"));
    std::ostringstream dist_csv;
    write_distribution_csv(r, g1, g2, 10, dist_csv);
    std::istringstream is(dist_csv.str());
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 1 + 2 * 10);
}

}  // TEST_SUITE

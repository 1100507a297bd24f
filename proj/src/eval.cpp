#include "afcc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "afcc/parallel.hpp"

namespace afcc {

const char* to_string(Group g) { return g == Group::native ? "native" : "non_native"; }

Group group_from_string(const std::string& s) {
    if (s == "native") return Group::native;
    if (s == "non_native") return Group::non_native;
    throw DataError("unknown group '" + s + "' (expected native or non_native)");
}

void LooConfig::validate() const {
    if (num_folds < 2) throw DataError("loo config: num_folds must be >= 2");
}

LooResult run_loo(const std::vector<LooSample>& corpus, const LooConfig& cfg,
                  const HmmConfig& hmm_cfg) {
    cfg.validate();
    hmm_cfg.validate();

    std::vector<size_t> native_idx, nonnative_idx;
    for (size_t i = 0; i < corpus.size(); ++i)
        (corpus[i].group == Group::native ? native_idx : nonnative_idx).push_back(i);

    if (native_idx.size() < static_cast<size_t>(cfg.num_folds))
        throw ProtocolError("loo: " + std::to_string(native_idx.size()) +
                            " native samples but " + std::to_string(cfg.num_folds) +
                            " folds requested (need at least one native per fold)");
    if (nonnative_idx.empty()) throw ProtocolError("loo: no non-native samples");

    // group natives by speaker so one speaker never spans folds; unlabeled
    // samples count as their own speaker
    std::map<std::string, std::vector<size_t>> by_speaker;
    for (size_t i : native_idx) {
        std::string key = corpus[i].speaker.empty()
                              ? "\x01sample:" + corpus[i].sample_id
                              : corpus[i].speaker;
        by_speaker[key].push_back(i);
    }
    std::vector<std::vector<size_t>> speaker_groups;
    speaker_groups.reserve(by_speaker.size());
    for (auto& [key, idxs] : by_speaker) speaker_groups.push_back(std::move(idxs));
    if (speaker_groups.size() < static_cast<size_t>(cfg.num_folds))
        throw ProtocolError("loo: only " + std::to_string(speaker_groups.size()) +
                            " distinct native speakers for " + std::to_string(cfg.num_folds) +
                            " folds");

    Rng rng(derive_seed(cfg.seed, hash_string("loo-folds")));
    rng.shuffle(speaker_groups);

    // deal speaker groups into the currently smallest fold
    std::vector<std::vector<size_t>> folds(static_cast<size_t>(cfg.num_folds));
    for (auto& grp : speaker_groups) {
        size_t target = 0;
        for (size_t f = 1; f < folds.size(); ++f)
            if (folds[f].size() < folds[target].size()) target = f;
        folds[target].insert(folds[target].end(), grp.begin(), grp.end());
    }
    size_t largest = 0;
    for (const auto& f : folds) largest = std::max(largest, f.size());
    if (native_idx.size() - largest < 2)
        throw ProtocolError("loo: a fold would leave fewer than 2 native training samples");

    // per-fold training and scoring; folds are independent
    size_t nf = folds.size();
    std::vector<std::vector<double>> heldout_scores(nf);
    std::vector<std::vector<double>> nn_scores(nf, std::vector<double>(nonnative_idx.size(), 0.0));

#pragma omp parallel for schedule(dynamic) num_threads(parallel::resolved_threads()) \
    if (!parallel::serial())
    for (long long ff = 0; ff < static_cast<long long>(nf); ++ff) {
        size_t f = static_cast<size_t>(ff);
        std::vector<FeatureMatrix> train_set;
        train_set.reserve(native_idx.size() - folds[f].size());
        for (size_t g = 0; g < nf; ++g) {
            if (g == f) continue;
            for (size_t i : folds[g]) train_set.push_back(corpus[i].features);
        }
        HmmConfig fold_cfg = hmm_cfg;
        fold_cfg.seed = derive_seed(hmm_cfg.seed, hash_string("loo-fold"), f);
        WordHmm model = train(train_set, fold_cfg);

        heldout_scores[f].resize(folds[f].size());
        for (size_t k = 0; k < folds[f].size(); ++k)
            heldout_scores[f][k] = score(model, corpus[folds[f][k]].features).loglik_per_frame;
        for (size_t k = 0; k < nonnative_idx.size(); ++k)
            nn_scores[f][k] = score(model, corpus[nonnative_idx[k]].features).loglik_per_frame;
    }

    LooResult out;
    out.folds.resize(nf);
    for (size_t f = 0; f < nf; ++f) {
        out.folds[f].reserve(folds[f].size());
        for (size_t i : folds[f]) out.folds[f].push_back(corpus[i].sample_id);
        for (size_t k = 0; k < folds[f].size(); ++k)
            out.scores.entries.push_back(
                {corpus[folds[f][k]].sample_id, Group::native, heldout_scores[f][k], 0.0});
    }
    out.nonnative_ids.reserve(nonnative_idx.size());
    out.nonnative_fold_scores.resize(nonnative_idx.size());
    for (size_t k = 0; k < nonnative_idx.size(); ++k) {
        out.nonnative_ids.push_back(corpus[nonnative_idx[k]].sample_id);
        double sum = 0.0;
        out.nonnative_fold_scores[k].resize(nf);
        for (size_t f = 0; f < nf; ++f) {
            out.nonnative_fold_scores[k][f] = nn_scores[f][k];
            sum += nn_scores[f][k];
        }
        out.scores.entries.push_back({corpus[nonnative_idx[k]].sample_id, Group::non_native,
                                      sum / static_cast<double>(nf), 0.0});
    }

    std::sort(out.scores.entries.begin(), out.scores.entries.end(),
              [](const ScoreEntry& a, const ScoreEntry& b) { return a.sample_id < b.sample_id; });
    return out;
}

ScoreSet rescale(const ScoreSet& scores, double target_mu, double target_sigma) {
    if (scores.entries.empty()) throw DataError("rescale: empty score set");
    if (!(target_sigma > 0.0)) throw DataError("rescale: target sigma must be positive");
    double mean = 0.0;
    for (const auto& e : scores.entries) mean += e.raw;
    mean /= static_cast<double>(scores.entries.size());
    double var = 0.0;
    for (const auto& e : scores.entries) var += (e.raw - mean) * (e.raw - mean);
    var /= static_cast<double>(scores.entries.size());
    if (!(var > 0.0)) throw NumericError("rescale: pooled raw scores have zero variance");
    double a = target_sigma / std::sqrt(var);
    double b = target_mu - a * mean;
    ScoreSet out = scores;
    for (auto& e : out.entries) e.rescaled = a * e.raw + b;
    return out;
}

std::pair<GroupGaussian, GroupGaussian> fit_groups(const ScoreSet& scores) {
    double sum[2] = {0.0, 0.0};
    int n[2] = {0, 0};
    for (const auto& e : scores.entries) {
        int g = e.group == Group::non_native ? 0 : 1;
        sum[g] += e.rescaled;
        ++n[g];
    }
    for (int g = 0; g < 2; ++g)
        if (n[g] < 2)
            throw NumericError(std::string("fit_groups: group ") +
                               (g == 0 ? "non_native" : "native") + " has " +
                               std::to_string(n[g]) + " samples, need at least 2");
    double mu[2] = {sum[0] / n[0], sum[1] / n[1]};
    double ss[2] = {0.0, 0.0};
    for (const auto& e : scores.entries) {
        int g = e.group == Group::non_native ? 0 : 1;
        ss[g] += (e.rescaled - mu[g]) * (e.rescaled - mu[g]);
    }
    GroupGaussian out[2];
    for (int g = 0; g < 2; ++g) {
        double var = ss[g] / (n[g] - 1);
        if (!(var > 0.0))
            throw NumericError(std::string("fit_groups: group ") +
                               (g == 0 ? "non_native" : "native") + " has zero variance");
        out[g] = {mu[g], std::sqrt(var), n[g]};
    }
    return {out[0], out[1]};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

RateResult classification_rate(const GroupGaussian& g1, const GroupGaussian& g2) {
    if (!(g1.sigma > 0.0) || !(g2.sigma > 0.0))
        throw NumericError("classification_rate: degenerate group (sigma must be positive)");
    if (g1.mu > g2.mu)
        throw NumericError("classification_rate: non-native mean " + std::to_string(g1.mu) +
                           " exceeds native mean " + std::to_string(g2.mu) +
                           " (orientation violated)");

    // threshold error: mass of X1 above x plus mass of X2 below x, halved
    auto threshold_error = [&](double x) {
        double z1 = (x - g1.mu) / g1.sigma;
        double z2 = (x - g2.mu) / g2.sigma;
        double p_x1_above = 0.5 * std::erfc(z1 / std::sqrt(2.0));
        double p_x2_below = 0.5 * std::erfc(-z2 / std::sqrt(2.0));
        return 0.5 * (p_x1_above + p_x2_below);
    };

    double xstar;
    if (g1.sigma == g2.sigma) {
        xstar = 0.5 * (g1.mu + g2.mu);
    } else {
        // equate weighted log-densities: a x^2 + b x + c = 0
        double s1 = g1.sigma * g1.sigma, s2 = g2.sigma * g2.sigma;
        double a = 1.0 / s1 - 1.0 / s2;
        double b = -2.0 * (g1.mu / s1 - g2.mu / s2);
        double c = g1.mu * g1.mu / s1 - g2.mu * g2.mu / s2 + 2.0 * std::log(g1.sigma / g2.sigma);
        double disc = b * b - 4.0 * a * c;
        if (disc < 0.0)
            throw NumericError("classification_rate: no real density crossing");
        double r1 = (-b + std::sqrt(disc)) / (2.0 * a);
        double r2 = (-b - std::sqrt(disc)) / (2.0 * a);
        double tol = 1e-12 * (1.0 + std::abs(g1.mu) + std::abs(g2.mu));
        bool ok1 = r1 >= g1.mu - tol && r1 <= g2.mu + tol;
        bool ok2 = r2 >= g1.mu - tol && r2 <= g2.mu + tol;
        if (ok1 && ok2)
            xstar = threshold_error(r1) <= threshold_error(r2) ? r1 : r2;
        else if (ok1)
            xstar = r1;
        else if (ok2)
            xstar = r2;
        else
            // nearly coincident groups: neither crossing separates the means;
            // the optimal single threshold is the crossing with lower error
            xstar = threshold_error(r1) <= threshold_error(r2) ? r1 : r2;
    }

    return {1.0 - threshold_error(xstar), xstar};
}

std::vector<size_t> filter_outliers(const std::vector<Group>& groups,
                                    const std::vector<double>& human_scores) {
    if (groups.size() != human_scores.size())
        throw DataError("filter_outliers: group/score size mismatch");
    double sum[2] = {0.0, 0.0};
    int n[2] = {0, 0};
    for (size_t i = 0; i < groups.size(); ++i) {
        int g = groups[i] == Group::non_native ? 0 : 1;
        sum[g] += human_scores[i];
        ++n[g];
    }
    if (n[0] == 0 || n[1] == 0) throw DataError("filter_outliers: a group is empty");
    double mu[2] = {sum[0] / n[0], sum[1] / n[1]};
    std::vector<size_t> keep;
    keep.reserve(groups.size());
    for (size_t i = 0; i < groups.size(); ++i) {
        int g = groups[i] == Group::non_native ? 0 : 1;
        double own = std::abs(human_scores[i] - mu[g]);
        double other = std::abs(human_scores[i] - mu[1 - g]);
        if (own <= other) keep.push_back(i);
    }
    return keep;
}

void write_scores_csv(const ScoreSet& scores, std::ostream& os) {
    os << "sample_id,group,raw_score,rescaled_score\n";
    os.precision(17);
    for (const auto& e : scores.entries)
        os << e.sample_id << ',' << to_string(e.group) << ',' << e.raw << ',' << e.rescaled
           << '\n';
}

void write_distribution_csv(const ScoreSet& scores, const GroupGaussian& g1,
                            const GroupGaussian& g2, int num_bins, std::ostream& os) {
    if (num_bins < 1) throw DataError("distribution csv: need at least 1 bin");
    double lo = scores.entries.front().rescaled, hi = lo;
    for (const auto& e : scores.entries) {
        lo = std::min(lo, e.rescaled);
        hi = std::max(hi, e.rescaled);
    }
    if (hi <= lo) hi = lo + 1.0;
    double width = (hi - lo) / num_bins;
    std::vector<int> counts[2];
    counts[0].assign(static_cast<size_t>(num_bins), 0);
    counts[1].assign(static_cast<size_t>(num_bins), 0);
    for (const auto& e : scores.entries) {
        int b = std::min(num_bins - 1, static_cast<int>((e.rescaled - lo) / width));
        ++counts[e.group == Group::non_native ? 0 : 1][static_cast<size_t>(b)];
    }
    os.precision(17);
    os << "group,bin_lo,bin_hi,count,fit_mu,fit_sigma,fit_n\n";
    for (int g = 0; g < 2; ++g) {
        const GroupGaussian& fit = g == 0 ? g1 : g2;
        for (int b = 0; b < num_bins; ++b)
            os << (g == 0 ? "non_native" : "native") << ',' << lo + b * width << ','
               << lo + (b + 1) * width << ',' << counts[g][static_cast<size_t>(b)] << ','
               << fit.mu << ',' << fit.sigma << ',' << fit.n << '\n';
    }
}

}  // namespace afcc

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "afcc/hmm.hpp"

namespace afcc {

enum class Group { non_native, native };  // omega1, omega2

const char* to_string(Group g);
Group group_from_string(const std::string& s);

struct ScoreEntry {
    std::string sample_id;
    Group group = Group::native;
    double raw = 0.0;
    double rescaled = 0.0;
};

struct ScoreSet {
    std::vector<ScoreEntry> entries;
};

struct GroupGaussian {
    double mu = 0.0;
    double sigma = 0.0;
    int n = 0;
};

struct LooConfig {
    int num_folds = 5;
    uint64_t seed = 0;
    bool outlier_filter = false;

    void validate() const;
};

// One utterance entering the LOO protocol.
struct LooSample {
    std::string sample_id;
    std::string speaker;
    Group group = Group::native;
    std::optional<double> human_score;
    FeatureMatrix features;
};

struct LooResult {
    ScoreSet scores;  // raw filled, rescaled zero
    std::vector<std::vector<std::string>> folds;  // native sample ids per fold
    // per-fold scores of every non-native sample, aligned with nonnative_ids
    std::vector<std::string> nonnative_ids;
    std::vector<std::vector<double>> nonnative_fold_scores;
};

// 5-fold protocol over native samples: train on the other folds, score the
// held-out natives, score every non-native with every fold and average.
// Fold assignment groups samples of one speaker together.
LooResult run_loo(const std::vector<LooSample>& corpus, const LooConfig& cfg,
                  const HmmConfig& hmm_cfg);

// One affine map over the pooled scores so the pooled mean/std hit the target.
ScoreSet rescale(const ScoreSet& scores, double target_mu, double target_sigma);

// Sample mean and unbiased std per group, over rescaled scores.
std::pair<GroupGaussian, GroupGaussian> fit_groups(const ScoreSet& scores);

struct RateResult {
    double rate = 0.0;
    double threshold = 0.0;
};

// Bayes minimum-error classification rate for equal priors; g1 is the
// lower-scoring (non-native) group.
RateResult classification_rate(const GroupGaussian& g1, const GroupGaussian& g2);

double normal_cdf(double z);

// Indices of samples to keep: drops entries whose human score sits nearer
// the opposite group's human mean than their own group's.
std::vector<size_t> filter_outliers(const std::vector<Group>& groups,
                                    const std::vector<double>& human_scores);

void write_scores_csv(const ScoreSet& scores, std::ostream& os);
void write_distribution_csv(const ScoreSet& scores, const GroupGaussian& g1,
                            const GroupGaussian& g2, int num_bins, std::ostream& os);

}  // namespace afcc

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "afcc/features.hpp"

namespace afcc {

struct HmmConfig {
    int num_states = 3;
    int mixtures_per_state = 1;
    int max_iters = 20;
    double ll_tolerance = 1e-4;
    double variance_floor_factor = 1e-3;
    uint64_t seed = 0;

    void validate() const;
    uint64_t hash() const;
};

// Diagonal-covariance Gaussian mixture over feature vectors.
struct GaussianMixture {
    int num_mix = 0;
    int dim = 0;
    std::vector<double> weights;  // num_mix
    std::vector<double> means;    // num_mix x dim
    std::vector<double> vars;     // num_mix x dim

    double log_density(const double* x) const;
    // log(w_m * N_m(x)) for one component
    double log_component_density(int m, const double* x) const;
};

// Left-to-right HMM: every state may self-loop or advance one state,
// state 0 holds all initial mass.
struct WordHmm {
    int num_states = 0;
    int dim = FeatureMatrix::kDim;
    std::vector<double> self_prob;  // per state; last state is absorbing
    std::vector<double> next_prob;
    std::vector<GaussianMixture> emissions;
    HmmConfig config;
    std::vector<double> train_loglik;  // per-iteration total training LL

    double transition(int from, int to) const;
};

struct HmmScore {
    double loglik_per_frame = 0.0;
};

WordHmm train(const std::vector<FeatureMatrix>& samples, const HmmConfig& cfg);

// Forward-algorithm log-likelihood, normalized by frame count.
HmmScore score(const WordHmm& model, const FeatureMatrix& sample);

void save_hmm(const WordHmm& model, std::ostream& os);
WordHmm load_hmm(std::istream& is);
std::string hmm_to_json(const WordHmm& model);

}  // namespace afcc

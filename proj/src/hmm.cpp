#include "afcc/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace afcc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kMinVarFloor = 1e-10;

double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct TrainAccum {
    // per state: mixture occupancies and moment sums, plus arc counts
    std::vector<double> occ;       // S x M
    std::vector<double> sum_x;     // S x M x D
    std::vector<double> sum_xx;    // S x M x D
    std::vector<double> self_arc;  // S
    std::vector<double> next_arc;  // S

    TrainAccum(int s, int m, int d)
        : occ(static_cast<size_t>(s) * m, 0.0),
          sum_x(static_cast<size_t>(s) * m * d, 0.0),
          sum_xx(static_cast<size_t>(s) * m * d, 0.0),
          self_arc(static_cast<size_t>(s), 0.0),
          next_arc(static_cast<size_t>(s), 0.0) {}
};

}  // namespace

void HmmConfig::validate() const {
    if (num_states < 1) throw DataError("hmm config: num_states must be positive");
    if (mixtures_per_state < 1) throw DataError("hmm config: mixtures_per_state must be positive");
    if (max_iters < 1) throw DataError("hmm config: max_iters must be positive");
    if (!(ll_tolerance > 0.0) || !(ll_tolerance < 1.0))
        throw DataError("hmm config: ll_tolerance must lie in (0, 1)");
    if (!(variance_floor_factor > 0.0))
        throw DataError("hmm config: variance_floor_factor must be positive");
}

uint64_t HmmConfig::hash() const {
    double fields[5] = {static_cast<double>(num_states), static_cast<double>(mixtures_per_state),
                        static_cast<double>(max_iters), ll_tolerance, variance_floor_factor};
    return hash_bytes(fields, sizeof fields, mix64(seed));
}

double GaussianMixture::log_component_density(int m, const double* x) const {
    const double* mu = means.data() + static_cast<size_t>(m) * dim;
    const double* var = vars.data() + static_cast<size_t>(m) * dim;
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) {
        double diff = x[d] - mu[d];
        acc += diff * diff / var[d] + std::log(var[d]);
    }
    return std::log(weights[static_cast<size_t>(m)]) - 0.5 * (acc + dim * kLog2Pi);
}

double GaussianMixture::log_density(const double* x) const {
    double acc = kNegInf;
    for (int m = 0; m < num_mix; ++m) acc = log_sum_exp(acc, log_component_density(m, x));
    return acc;
}

double WordHmm::transition(int from, int to) const {
    if (from < 0 || to < 0 || from >= num_states || to >= num_states)
        throw DataError("hmm: transition index out of range");
    if (to == from) return self_prob[static_cast<size_t>(from)];
    if (to == from + 1) return next_prob[static_cast<size_t>(from)];
    return 0.0;
}

namespace {

// log alpha for one sample; lb is T x S frame log-densities. Returns total LL.
double forward_pass(const std::vector<double>& lb, size_t T, int S,
                    const std::vector<double>& log_self, const std::vector<double>& log_next,
                    std::vector<double>& lalpha) {
    lalpha.assign(T * static_cast<size_t>(S), kNegInf);
    lalpha[0] = lb[0];  // all initial mass on state 0
    for (size_t t = 1; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            double stay = lalpha[(t - 1) * S + s] + log_self[static_cast<size_t>(s)];
            double enter = s > 0 ? lalpha[(t - 1) * S + s - 1] + log_next[static_cast<size_t>(s) - 1]
                                 : kNegInf;
            lalpha[t * S + s] = lb[t * S + s] + log_sum_exp(stay, enter);
        }
    }
    double ll = kNegInf;
    for (int s = 0; s < S; ++s) ll = log_sum_exp(ll, lalpha[(T - 1) * S + s]);
    return ll;
}

void backward_pass(const std::vector<double>& lb, size_t T, int S,
                   const std::vector<double>& log_self, const std::vector<double>& log_next,
                   std::vector<double>& lbeta) {
    lbeta.assign(T * static_cast<size_t>(S), 0.0);
    for (size_t ti = T - 1; ti-- > 0;) {
        for (int s = 0; s < S; ++s) {
            double stay = log_self[static_cast<size_t>(s)] + lb[(ti + 1) * S + s] +
                          lbeta[(ti + 1) * S + s];
            double advance = s + 1 < S ? log_next[static_cast<size_t>(s)] +
                                             lb[(ti + 1) * S + s + 1] +
                                             lbeta[(ti + 1) * S + s + 1]
                                       : kNegInf;
            lbeta[ti * S + s] = log_sum_exp(stay, advance);
        }
    }
}

void check_sample(const FeatureMatrix& fm, int num_states, size_t index) {
    if (fm.num_frames < static_cast<size_t>(num_states))
        throw ProtocolError("hmm train: sample " + std::to_string(index) + " has " +
                            std::to_string(fm.num_frames) + " frames, fewer than " +
                            std::to_string(num_states) + " states");
}

}  // namespace

WordHmm train(const std::vector<FeatureMatrix>& samples, const HmmConfig& cfg) {
    cfg.validate();
    if (samples.empty()) throw ProtocolError("hmm train: empty sample list");
    if (samples.size() < 2) throw ProtocolError("hmm train: need at least 2 samples");
    for (size_t i = 0; i < samples.size(); ++i) check_sample(samples[i], cfg.num_states, i);

    const int S = cfg.num_states;
    const int M = cfg.mixtures_per_state;
    const int D = FeatureMatrix::kDim;

    // variance floor from the pooled feature variance
    size_t total_frames = 0;
    std::vector<double> gmean(D, 0.0), gvar(D, 0.0);
    for (const auto& fm : samples) {
        total_frames += fm.num_frames;
        for (size_t t = 0; t < fm.num_frames; ++t)
            for (int d = 0; d < D; ++d) gmean[static_cast<size_t>(d)] += fm.at(t, d);
    }
    for (int d = 0; d < D; ++d) gmean[static_cast<size_t>(d)] /= static_cast<double>(total_frames);
    for (const auto& fm : samples)
        for (size_t t = 0; t < fm.num_frames; ++t)
            for (int d = 0; d < D; ++d) {
                double diff = fm.at(t, d) - gmean[static_cast<size_t>(d)];
                gvar[static_cast<size_t>(d)] += diff * diff;
            }
    std::vector<double> var_floor(D);
    for (int d = 0; d < D; ++d) {
        gvar[static_cast<size_t>(d)] /= static_cast<double>(total_frames);
        var_floor[static_cast<size_t>(d)] =
            std::max(cfg.variance_floor_factor * gvar[static_cast<size_t>(d)], kMinVarFloor);
    }

    WordHmm model;
    model.num_states = S;
    model.dim = D;
    model.config = cfg;
    model.self_prob.assign(static_cast<size_t>(S), 0.5);
    model.next_prob.assign(static_cast<size_t>(S), 0.5);

    // init: uniform temporal segmentation pooled across samples
    std::vector<std::vector<const double*>> state_frames(static_cast<size_t>(S));
    for (const auto& fm : samples) {
        size_t T = fm.num_frames;
        for (int s = 0; s < S; ++s) {
            size_t lo = T * static_cast<size_t>(s) / static_cast<size_t>(S);
            size_t hi = T * (static_cast<size_t>(s) + 1) / static_cast<size_t>(S);
            for (size_t t = lo; t < hi; ++t)
                state_frames[static_cast<size_t>(s)].push_back(fm.row(t));
        }
    }
    model.emissions.resize(static_cast<size_t>(S));
    for (int s = 0; s < S; ++s) {
        auto& gm = model.emissions[static_cast<size_t>(s)];
        gm.num_mix = M;
        gm.dim = D;
        gm.weights.assign(static_cast<size_t>(M), 1.0 / M);
        gm.means.assign(static_cast<size_t>(M) * D, 0.0);
        gm.vars.assign(static_cast<size_t>(M) * D, 0.0);
        const auto& rows = state_frames[static_cast<size_t>(s)];
        // split the state's pooled span into one contiguous chunk per mixture
        for (int m = 0; m < M; ++m) {
            size_t lo = rows.size() * static_cast<size_t>(m) / static_cast<size_t>(M);
            size_t hi = rows.size() * (static_cast<size_t>(m) + 1) / static_cast<size_t>(M);
            double* mu = gm.means.data() + static_cast<size_t>(m) * D;
            double* var = gm.vars.data() + static_cast<size_t>(m) * D;
            size_t n = hi > lo ? hi - lo : 0;
            if (n == 0) {
                for (int d = 0; d < D; ++d) {
                    mu[d] = gmean[static_cast<size_t>(d)];
                    var[d] = var_floor[static_cast<size_t>(d)];
                }
                continue;
            }
            for (size_t i = lo; i < hi; ++i)
                for (int d = 0; d < D; ++d) mu[d] += rows[i][d];
            for (int d = 0; d < D; ++d) mu[d] /= static_cast<double>(n);
            for (size_t i = lo; i < hi; ++i)
                for (int d = 0; d < D; ++d) {
                    double diff = rows[i][d] - mu[d];
                    var[d] += diff * diff;
                }
            for (int d = 0; d < D; ++d)
                var[d] = std::max(var[d] / static_cast<double>(n), var_floor[static_cast<size_t>(d)]);
        }
        double mean_dur = static_cast<double>(rows.size()) / static_cast<double>(samples.size());
        double self = mean_dur > 1.0 ? (mean_dur - 1.0) / mean_dur : 0.1;
        self = std::clamp(self, 0.1, 0.99);
        model.self_prob[static_cast<size_t>(s)] = self;
        model.next_prob[static_cast<size_t>(s)] = 1.0 - self;
    }
    model.self_prob[static_cast<size_t>(S) - 1] = 1.0;
    model.next_prob[static_cast<size_t>(S) - 1] = 0.0;

    // Baum-Welch
    std::vector<double> log_self(static_cast<size_t>(S)), log_next(static_cast<size_t>(S));
    std::vector<double> lb, lcomp, lalpha, lbeta;
    double prev_ll = kNegInf;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        for (int s = 0; s < S; ++s) {
            log_self[static_cast<size_t>(s)] = std::log(model.self_prob[static_cast<size_t>(s)]);
            log_next[static_cast<size_t>(s)] =
                model.next_prob[static_cast<size_t>(s)] > 0.0
                    ? std::log(model.next_prob[static_cast<size_t>(s)])
                    : kNegInf;
        }

        TrainAccum acc(S, M, D);
        double total_ll = 0.0;
        for (const auto& fm : samples) {
            size_t T = fm.num_frames;
            lb.assign(T * static_cast<size_t>(S), 0.0);
            lcomp.assign(T * static_cast<size_t>(S) * M, 0.0);
            for (size_t t = 0; t < T; ++t)
                for (int s = 0; s < S; ++s) {
                    const auto& gm = model.emissions[static_cast<size_t>(s)];
                    double tot = kNegInf;
                    for (int m = 0; m < M; ++m) {
                        double lc = gm.log_component_density(m, fm.row(t));
                        lcomp[(t * S + s) * static_cast<size_t>(M) + m] = lc;
                        tot = log_sum_exp(tot, lc);
                    }
                    lb[t * S + s] = tot;
                }

            double ll = forward_pass(lb, T, S, log_self, log_next, lalpha);
            backward_pass(lb, T, S, log_self, log_next, lbeta);
            total_ll += ll;

            for (size_t t = 0; t < T; ++t)
                for (int s = 0; s < S; ++s) {
                    double lg = lalpha[t * S + s] + lbeta[t * S + s] - ll;
                    if (lg == kNegInf) continue;
                    double gamma = std::exp(lg);
                    const double* x = fm.row(t);
                    for (int m = 0; m < M; ++m) {
                        double gm_resp =
                            gamma *
                            std::exp(lcomp[(t * S + s) * static_cast<size_t>(M) + m] -
                                     lb[t * S + s]);
                        size_t sm = (static_cast<size_t>(s) * M + m);
                        acc.occ[sm] += gm_resp;
                        double* sx = acc.sum_x.data() + sm * D;
                        double* sxx = acc.sum_xx.data() + sm * D;
                        for (int d = 0; d < D; ++d) {
                            sx[d] += gm_resp * x[d];
                            sxx[d] += gm_resp * x[d] * x[d];
                        }
                    }
                    if (t + 1 < T) {
                        double arc_self = std::exp(lalpha[t * S + s] +
                                                   log_self[static_cast<size_t>(s)] +
                                                   lb[(t + 1) * S + s] +
                                                   lbeta[(t + 1) * S + s] - ll);
                        acc.self_arc[static_cast<size_t>(s)] += arc_self;
                        if (s + 1 < S && log_next[static_cast<size_t>(s)] != kNegInf) {
                            double arc_next = std::exp(lalpha[t * S + s] +
                                                       log_next[static_cast<size_t>(s)] +
                                                       lb[(t + 1) * S + s + 1] +
                                                       lbeta[(t + 1) * S + s + 1] - ll);
                            acc.next_arc[static_cast<size_t>(s)] += arc_next;
                        }
                    }
                }
        }

        model.train_loglik.push_back(total_ll);
        if (iter > 0 && total_ll - prev_ll < cfg.ll_tolerance) break;
        prev_ll = total_ll;

        // M-step
        for (int s = 0; s < S; ++s) {
            auto& gm = model.emissions[static_cast<size_t>(s)];
            double state_occ = 0.0;
            for (int m = 0; m < M; ++m) state_occ += acc.occ[static_cast<size_t>(s) * M + m];
            if (state_occ < 1e-8) continue;  // unvisited state keeps its parameters
            for (int m = 0; m < M; ++m) {
                size_t sm = static_cast<size_t>(s) * M + m;
                double occ = acc.occ[sm];
                if (occ < 1e-8) continue;
                gm.weights[static_cast<size_t>(m)] = occ / state_occ;
                double* mu = gm.means.data() + static_cast<size_t>(m) * D;
                double* var = gm.vars.data() + static_cast<size_t>(m) * D;
                const double* sx = acc.sum_x.data() + sm * D;
                const double* sxx = acc.sum_xx.data() + sm * D;
                for (int d = 0; d < D; ++d) {
                    mu[d] = sx[d] / occ;
                    double v = sxx[d] / occ - mu[d] * mu[d];
                    var[d] = std::max(v, var_floor[static_cast<size_t>(d)]);
                }
            }
            // renormalize weights after any skipped mixtures
            double wsum = 0.0;
            for (int m = 0; m < M; ++m) wsum += gm.weights[static_cast<size_t>(m)];
            for (int m = 0; m < M; ++m) gm.weights[static_cast<size_t>(m)] /= wsum;

            if (s + 1 < S) {
                double denom = acc.self_arc[static_cast<size_t>(s)] +
                               acc.next_arc[static_cast<size_t>(s)];
                if (denom > 1e-12) {
                    model.self_prob[static_cast<size_t>(s)] =
                        acc.self_arc[static_cast<size_t>(s)] / denom;
                    model.next_prob[static_cast<size_t>(s)] =
                        acc.next_arc[static_cast<size_t>(s)] / denom;
                }
            }
        }
    }
    return model;
}

HmmScore score(const WordHmm& model, const FeatureMatrix& sample) {
    if (sample.num_frames == 0) throw DataError("hmm score: empty sample");
    if (model.dim != FeatureMatrix::kDim)
        throw DataError("hmm score: model dimension mismatch");
    const int S = model.num_states;
    const size_t T = sample.num_frames;
    std::vector<double> log_self(static_cast<size_t>(S)), log_next(static_cast<size_t>(S));
    for (int s = 0; s < S; ++s) {
        log_self[static_cast<size_t>(s)] = std::log(model.self_prob[static_cast<size_t>(s)]);
        log_next[static_cast<size_t>(s)] = model.next_prob[static_cast<size_t>(s)] > 0.0
                                               ? std::log(model.next_prob[static_cast<size_t>(s)])
                                               : kNegInf;
    }
    std::vector<double> lb(T * static_cast<size_t>(S));
    for (size_t t = 0; t < T; ++t)
        for (int s = 0; s < S; ++s)
            lb[t * S + s] = model.emissions[static_cast<size_t>(s)].log_density(sample.row(t));
    std::vector<double> lalpha;
    double ll = forward_pass(lb, T, S, log_self, log_next, lalpha);
    return {ll / static_cast<double>(T)};
}

namespace {
constexpr uint32_t kHmmMagic = 0x4d484141;  // "AAHM"
constexpr uint32_t kHmmVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

void put_vec(std::ostream& os, const std::vector<double>& v) {
    put<uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_vec(std::istream& is) {
    auto n = get<uint64_t>(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}
}  // namespace

void save_hmm(const WordHmm& model, std::ostream& os) {
    put(os, kHmmMagic);
    put(os, kHmmVersion);
    put<int32_t>(os, model.num_states);
    put<int32_t>(os, model.dim);
    put<int32_t>(os, model.config.num_states);
    put<int32_t>(os, model.config.mixtures_per_state);
    put<int32_t>(os, model.config.max_iters);
    put(os, model.config.ll_tolerance);
    put(os, model.config.variance_floor_factor);
    put(os, model.config.seed);
    put(os, model.config.hash());
    put_vec(os, model.self_prob);
    put_vec(os, model.next_prob);
    for (const auto& gm : model.emissions) {
        put<int32_t>(os, gm.num_mix);
        put<int32_t>(os, gm.dim);
        put_vec(os, gm.weights);
        put_vec(os, gm.means);
        put_vec(os, gm.vars);
    }
    put_vec(os, model.train_loglik);
}

WordHmm load_hmm(std::istream& is) {
    if (get<uint32_t>(is) != kHmmMagic) throw DataError("hmm load: bad magic");
    if (get<uint32_t>(is) != kHmmVersion) throw DataError("hmm load: unsupported version");
    WordHmm model;
    model.num_states = get<int32_t>(is);
    model.dim = get<int32_t>(is);
    model.config.num_states = get<int32_t>(is);
    model.config.mixtures_per_state = get<int32_t>(is);
    model.config.max_iters = get<int32_t>(is);
    model.config.ll_tolerance = get<double>(is);
    model.config.variance_floor_factor = get<double>(is);
    model.config.seed = get<uint64_t>(is);
    uint64_t stored_hash = get<uint64_t>(is);
    if (stored_hash != model.config.hash()) throw DataError("hmm load: config hash mismatch");
    model.self_prob = get_vec(is);
    model.next_prob = get_vec(is);
    model.emissions.resize(static_cast<size_t>(model.num_states));
    for (auto& gm : model.emissions) {
        gm.num_mix = get<int32_t>(is);
        gm.dim = get<int32_t>(is);
        gm.weights = get_vec(is);
        gm.means = get_vec(is);
        gm.vars = get_vec(is);
    }
    model.train_loglik = get_vec(is);
    if (!is) throw DataError("hmm load: truncated stream");
    return model;
}

std::string hmm_to_json(const WordHmm& model) {
    nlohmann::json j;
    j["num_states"] = model.num_states;
    j["dim"] = model.dim;
    j["self_prob"] = model.self_prob;
    j["next_prob"] = model.next_prob;
    j["train_loglik"] = model.train_loglik;
    j["states"] = nlohmann::json::array();
    for (const auto& gm : model.emissions) {
        nlohmann::json s;
        s["weights"] = gm.weights;
        s["means"] = gm.means;
        s["vars"] = gm.vars;
        j["states"].push_back(s);
    }
    return j.dump(2);
}

}  // namespace afcc

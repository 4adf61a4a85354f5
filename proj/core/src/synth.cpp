#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "decennt/data.hpp"
#include "decennt/error.hpp"
#include "decennt/rng.hpp"

namespace decennt {

namespace {

// Zero-mean, unit-variance, temporally smoothed channel noise.
std::vector<double> smoothed_noise(Rng& rng, std::size_t timepoints) {
    constexpr double kSmooth = 0.55;
    std::vector<double> x(timepoints);
    double prev = rng.normal();
    for (std::size_t t = 0; t < timepoints; ++t) {
        prev = kSmooth * prev + rng.normal();
        x[t] = prev;
    }
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(timepoints);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(timepoints);
    const double inv = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    for (auto& v : x) v = (v - mean) * inv;
    return x;
}

}  // namespace

void KeywordSpec::validate() const {
    if (keyword_len >= timepoints) {
        throw Error::parameter("keyword generator: keyword length must be shorter than the series");
    }
    if (count == 0 || count % 2 != 0) {
        throw Error::parameter("keyword generator: sample count must be positive and even");
    }
    if (components < 4) throw Error::parameter("keyword generator: needs at least 4 channels");
    if (snr <= 0.0) throw Error::parameter("keyword generator: snr must be positive");
}

Dataset synth_keyword_dataset(const KeywordSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t n = spec.components;
    const std::size_t timepoints = spec.timepoints;
    const std::size_t klen = spec.keyword_len;

    // Fixed band-limited template: a shared envelope-carrier waveform in a
    // medium-to-high channel band, per-channel tapered. The shared carrier
    // makes band channels coherent inside the window, which survives the
    // amplitude renormalization below.
    const std::size_t band_lo = n / 2;
    const std::size_t band_hi = band_lo + std::max<std::size_t>(2, n / 4);
    Matrix keyword_template(n, klen, 0.0);
    for (std::size_t c = band_lo; c < band_hi && c < n; ++c) {
        const double rel = static_cast<double>(c - band_lo) / static_cast<double>(band_hi - band_lo - 1 ? band_hi - band_lo - 1 : 1);
        const double channel_weight = 0.5 + 0.5 * std::sin(3.14159265358979323846 * rel);
        for (std::size_t tau = 0; tau < klen; ++tau) {
            const double phase = static_cast<double>(tau) / static_cast<double>(klen);
            const double envelope = std::sin(3.14159265358979323846 * (phase + 0.5 / static_cast<double>(klen)));
            const double carrier = std::cos(2.0 * 3.14159265358979323846 * 0.19 * static_cast<double>(tau));
            keyword_template.at(c, tau) = channel_weight * envelope * carrier;
        }
    }

    Dataset ds;
    ds.components = n;
    ds.timepoints = timepoints;
    ds.provenance = "synthetic keyword-in-noise";
    ds.samples.reserve(spec.count);

    Rng rng(derive_seed(seed, 0x4B455957ULL));  // "KEYW"
    for (std::size_t idx = 0; idx < spec.count; ++idx) {
        const int label = idx < spec.count / 2 ? 1 : 0;
        Sample s;
        char buf[32];
        std::snprintf(buf, sizeof buf, "kw-%06zu", idx);
        s.id = buf;
        s.label = label;
        s.series = Matrix(n, timepoints);
        for (std::size_t c = 0; c < n; ++c) {
            auto channel = smoothed_noise(rng, timepoints);
            for (std::size_t t = 0; t < timepoints; ++t) s.series.at(c, t) = channel[t];
        }
        std::vector<std::uint8_t> mask(timepoints, 0);
        if (label == 1) {
            const std::size_t start = static_cast<std::size_t>(rng.below(timepoints - klen + 1));
            for (std::size_t tau = 0; tau < klen; ++tau) mask[start + tau] = 1;
            for (std::size_t c = 0; c < n; ++c) {
                for (std::size_t tau = 0; tau < klen; ++tau) {
                    s.series.at(c, start + tau) += spec.snr * keyword_template.at(c, tau);
                }
            }
            // Renormalize the mixed window per channel to the channel's
            // out-of-window amplitude distribution; classification by
            // amplitude is thereby ruled out.
            for (std::size_t c = 0; c < n; ++c) {
                double out_mean = 0.0, out_var = 0.0;
                const std::size_t out_count = timepoints - klen;
                for (std::size_t t = 0; t < timepoints; ++t) {
                    if (!mask[t]) out_mean += s.series.at(c, t);
                }
                out_mean /= static_cast<double>(out_count);
                for (std::size_t t = 0; t < timepoints; ++t) {
                    if (!mask[t]) {
                        const double d = s.series.at(c, t) - out_mean;
                        out_var += d * d;
                    }
                }
                out_var /= static_cast<double>(out_count);

                double in_mean = 0.0, in_var = 0.0;
                for (std::size_t tau = 0; tau < klen; ++tau) in_mean += s.series.at(c, start + tau);
                in_mean /= static_cast<double>(klen);
                for (std::size_t tau = 0; tau < klen; ++tau) {
                    const double d = s.series.at(c, start + tau) - in_mean;
                    in_var += d * d;
                }
                in_var /= static_cast<double>(klen);
                if (in_var < 1e-18) continue;
                const double gain = std::sqrt(out_var / in_var);
                for (std::size_t tau = 0; tau < klen; ++tau) {
                    const double v = s.series.at(c, start + tau);
                    s.series.at(c, start + tau) = (v - in_mean) * gain + out_mean;
                }
            }
        }
        s.event_mask = std::move(mask);
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

// --- switching VAR ------------------------------------------------------

double spectral_radius(const Matrix& m) {
    if (m.rows != m.cols) throw Error::dimension("spectral_radius: matrix not square");
    Eigen::MatrixXd em(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) em(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.at(i, j);
    }
    const auto eig = em.eigenvalues();
    double rho = 0.0;
    for (Eigen::Index i = 0; i < eig.size(); ++i) rho = std::max(rho, std::abs(eig[i]));
    return rho;
}

void SwitchingVarSpec::validate() const {
    if (components == 0 || timepoints == 0) throw Error::parameter("svar spec: empty dimensions");
    if (regimes.empty()) throw Error::parameter("svar spec: at least one regime required");
    if (spectral_radius_cap >= 1.0 || spectral_radius_cap <= 0.0) {
        throw Error::stability("svar spec: spectral radius cap must lie in (0, 1)");
    }
    std::size_t prev_start = 0;
    for (std::size_t r = 0; r < regimes.size(); ++r) {
        const Regime& reg = regimes[r];
        if (r == 0 && reg.start != 1) throw Error::parameter("svar spec: first regime must start at t=1");
        if (r > 0 && reg.start <= prev_start) {
            throw Error::parameter("svar spec: regime starts must be strictly increasing");
        }
        if (reg.start > timepoints) throw Error::parameter("svar spec: regime starts beyond the series");
        prev_start = reg.start;
        if (reg.adjacency.rows != components || reg.adjacency.cols != components ||
            reg.coefficients.rows != components || reg.coefficients.cols != components) {
            throw Error::parameter("svar spec: regime matrices must be n x n");
        }
        for (std::size_t i = 0; i < components; ++i) {
            for (std::size_t j = 0; j < components; ++j) {
                const double a = reg.adjacency.at(i, j);
                if (a != 0.0 && a != 1.0) throw Error::parameter("svar spec: adjacency entries must be 0/1");
                if ((a == 0.0) != (reg.coefficients.at(i, j) == 0.0)) {
                    throw Error::parameter("svar spec: coefficient support must equal adjacency");
                }
            }
        }
        const double rho = spectral_radius(reg.coefficients);
        if (rho > spectral_radius_cap) {
            throw Error::stability("svar spec: regime spectral radius exceeds the cap");
        }
    }
}

const Regime& SwitchingVarSpec::regime_at(std::size_t t) const {
    if (t == 0 || t > timepoints) throw Error::parameter("svar spec: timepoint out of range");
    const Regime* active = &regimes.front();
    for (const auto& reg : regimes) {
        if (reg.start <= t) active = &reg;
    }
    return *active;
}

SwitchingVarSpec reverse_regime_edges(const SwitchingVarSpec& spec, std::size_t regime_index) {
    if (regime_index >= spec.regimes.size()) {
        throw Error::parameter("reverse_regime_edges: regime index out of range");
    }
    SwitchingVarSpec out = spec;
    Regime& reg = out.regimes[regime_index];
    Matrix a_t(spec.components, spec.components);
    Matrix c_t(spec.components, spec.components);
    for (std::size_t i = 0; i < spec.components; ++i) {
        for (std::size_t j = 0; j < spec.components; ++j) {
            a_t.at(i, j) = reg.adjacency.at(j, i);
            c_t.at(i, j) = reg.coefficients.at(j, i);
        }
    }
    reg.adjacency = std::move(a_t);
    reg.coefficients = std::move(c_t);
    return out;
}

SvarDataset synth_svar_dataset(const SwitchingVarSpec& class0, std::size_t reversed_regime,
                               std::uint64_t seed, std::size_t count_per_class) {
    class0.validate();
    if (count_per_class == 0) throw Error::parameter("svar generator: count per class must be positive");
    SvarDataset out;
    out.class0 = class0;
    out.class1 = reverse_regime_edges(class0, reversed_regime);
    out.class1.validate();

    const std::size_t n = class0.components;
    const std::size_t timepoints = class0.timepoints;
    out.dataset.components = n;
    out.dataset.timepoints = timepoints;
    out.dataset.provenance = "synthetic switching VAR";
    out.dataset.samples.reserve(2 * count_per_class);

    Rng rng(derive_seed(seed, 0x53564152ULL));  // "SVAR"
    for (int label : {0, 1}) {
        const SwitchingVarSpec& spec = label == 0 ? out.class0 : out.class1;
        for (std::size_t idx = 0; idx < count_per_class; ++idx) {
            Sample s;
            char buf[32];
            std::snprintf(buf, sizeof buf, "svar-%d-%06zu", label, idx);
            s.id = buf;
            s.label = label;
            s.series = Matrix(n, timepoints);
            std::vector<double> state(n);
            for (auto& v : state) v = spec.noise_scale * rng.normal();
            for (std::size_t i = 0; i < n; ++i) s.series.at(i, 0) = state[i];
            for (std::size_t t = 1; t < timepoints; ++t) {
                const Regime& reg = spec.regime_at(t + 1);  // regime of the 1-based target timepoint
                std::vector<double> next(n, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += reg.coefficients.at(i, j) * state[j];
                    next[i] = acc + spec.noise_scale * rng.normal();
                }
                state = std::move(next);
                for (std::size_t i = 0; i < n; ++i) s.series.at(i, t) = state[i];
            }
            out.dataset.samples.push_back(std::move(s));
        }
    }
    out.dataset.validate();
    return out;
}

SwitchingVarSpec make_svar_benchmark(std::size_t components, std::size_t timepoints,
                                     std::size_t edges_per_regime, double coupling,
                                     double noise_scale, std::uint64_t seed) {
    if (components < 2) throw Error::parameter("svar benchmark: needs at least 2 components");
    const std::size_t max_pairs = components * (components - 1) / 2;
    if (edges_per_regime == 0 || edges_per_regime > max_pairs) {
        throw Error::parameter("svar benchmark: edge count out of range");
    }

    Rng rng(derive_seed(seed, 0x42454E43ULL));  // "BENC"
    SwitchingVarSpec spec;
    spec.components = components;
    spec.timepoints = timepoints;
    spec.noise_scale = noise_scale;
    spec.spectral_radius_cap = 0.95;

    const std::size_t starts[2] = {1, timepoints / 2 + 1};
    for (int r = 0; r < 2; ++r) {
        Regime reg;
        reg.start = starts[r];
        reg.adjacency = Matrix(components, components, 0.0);
        reg.coefficients = Matrix(components, components, 0.0);
        for (std::size_t i = 0; i < components; ++i) {
            reg.adjacency.at(i, i) = 1.0;
            reg.coefficients.at(i, i) = 0.3;
        }
        // distinct unordered pairs, each used in exactly one direction
        std::size_t placed = 0;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < components; ++i) {
            for (std::size_t j = i + 1; j < components; ++j) pairs.emplace_back(i, j);
        }
        rng.shuffle(pairs);
        for (const auto& [a, b] : pairs) {
            if (placed == edges_per_regime) break;
            const bool forward = rng.uniform() < 0.5;
            const std::size_t src = forward ? a : b;
            const std::size_t dst = forward ? b : a;
            reg.adjacency.at(dst, src) = 1.0;  // edge src -> dst
            reg.coefficients.at(dst, src) = coupling;
            ++placed;
        }
        const double rho = spectral_radius(reg.coefficients);
        if (rho > spec.spectral_radius_cap) {
            const double shrink = spec.spectral_radius_cap * 0.98 / rho;
            for (auto& v : reg.coefficients.data) v *= shrink;
        }
        spec.regimes.push_back(std::move(reg));
    }
    spec.validate();
    return spec;
}

Matrix union_support(const SwitchingVarSpec& spec) {
    Matrix support(spec.components, spec.components, 0.0);
    for (const auto& reg : spec.regimes) {
        for (std::size_t i = 0; i < spec.components; ++i) {
            for (std::size_t j = 0; j < spec.components; ++j) {
                if (i != j && reg.adjacency.at(i, j) != 0.0) support.at(i, j) = 1.0;
            }
        }
    }
    return support;
}

}  // namespace decennt

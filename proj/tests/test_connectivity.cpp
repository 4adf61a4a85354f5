#include <doctest.h>

#include <cmath>

#include "decennt/connectivity.hpp"
#include "gradcheck.hpp"

using namespace decennt;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (auto& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("single component attends to itself with full weight") {
    Rng rng(2);
    auto p = AttentionParams::init(4, 3, rng);
    Matrix h(1, 4);
    for (auto& v : h.data) v = rng.uniform(-1.0, 1.0);
    auto [w, updated] = attend(p, h);
    REQUIRE(w.rows == 1);
    CHECK(w.at(0, 0) == 1.0);

    // updated embedding equals the value projection
    for (std::size_t k = 0; k < 3; ++k) {
        double v = 0.0;
        for (std::size_t j = 0; j < 4; ++j) v += h.at(0, j) * p.w_value->at(j, k);
        CHECK(updated.at(0, k) == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("identical embeddings give uniform attention rows") {
    Rng rng(3);
    auto p = AttentionParams::init(6, 4, rng);
    Matrix h(5, 6);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 6; ++j) h.at(i, j) = 0.3 * static_cast<double>(j) - 0.5;
    }
    auto [w, updated] = attend(p, h);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(w.at(i, j) == doctest::Approx(0.2).epsilon(1e-12));
        }
    }
}

TEST_CASE("rows are stochastic and updated embeddings match brute force") {
    Rng rng(17);
    auto p = AttentionParams::init(8, 5, rng);
    auto h = random_matrix(rng, 4, 8);
    auto [w, updated] = attend(p, h);

    for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(w.at(i, j) > 0.0);
            sum += w.at(i, j);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }

    // independent brute-force re-evaluation of Eq-style attention
    auto project = [&](const TensorPtr& weights) {
        Matrix out(4, 5, 0.0);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t k = 0; k < 5; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < 8; ++j) acc += h.at(i, j) * weights->at(j, k);
                out.at(i, k) = acc;
            }
        }
        return out;
    };
    auto keys = project(p.w_key);
    auto values = project(p.w_value);
    auto queries = project(p.w_query);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> scores(4);
        for (std::size_t j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 5; ++k) acc += queries.at(i, k) * keys.at(j, k);
            scores[j] = acc;
        }
        const double mx = *std::max_element(scores.begin(), scores.end());
        double z = 0.0;
        for (double& s : scores) {
            s = std::exp(s - mx);
            z += s;
        }
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(w.at(i, j) == doctest::Approx(scores[j] / z).epsilon(1e-12));
        }
        for (std::size_t k = 0; k < 5; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < 4; ++j) acc += (scores[j] / z) * values.at(j, k);
            CHECK(updated.at(i, k) == doctest::Approx(acc).epsilon(1e-10));
        }
    }
}

TEST_CASE("permutation equivariance of the attention graph") {
    Rng rng(23);
    auto p = AttentionParams::init(6, 4, rng);
    auto h = random_matrix(rng, 5, 6);
    const std::size_t perm[5] = {3, 1, 4, 0, 2};

    Matrix ph(5, 6);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 6; ++j) ph.at(i, j) = h.at(perm[i], j);
    }
    auto [w, u] = attend(p, h);
    auto [pw, pu] = attend(p, ph);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            max_diff = std::max(max_diff, std::abs(pw.at(i, j) - w.at(perm[i], perm[j])));
        }
    }
    CHECK(max_diff <= 1e-9);
}

TEST_CASE("attention graphs are directed: asymmetry is structural") {
    Rng rng(31);
    auto p = AttentionParams::init(6, 4, rng);
    // embeddings with very different norms produce asymmetric attention
    Matrix h(3, 6);
    for (std::size_t j = 0; j < 6; ++j) {
        h.at(0, j) = 3.0 * rng.uniform(-1.0, 1.0);
        h.at(1, j) = 0.1 * rng.uniform(-1.0, 1.0);
        h.at(2, j) = rng.uniform(-1.0, 1.0);
    }
    auto [w, u] = attend(p, h);
    double max_asym = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            max_asym = std::max(max_asym, std::abs(w.at(i, j) - w.at(j, i)));
        }
    }
    CHECK(max_asym > 0.01);
}

TEST_CASE("sequence attention: reduction, determinism, permutation") {
    Rng rng(41);
    auto p = AttentionParams::init(4, 3, rng);

    // T=1 reduces to a single attend call
    Embeddings emb;
    emb.components = 3;
    emb.timepoints = 1;
    emb.width = 4;
    emb.data.resize(12);
    for (auto& v : emb.data) v = rng.uniform(-1.0, 1.0);
    auto seq = attend_sequence(p, emb);
    REQUIRE(seq.graph.timepoints() == 1);
    Matrix h(3, 4);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < 4; ++k) h.at(i, k) = emb.at(i, 0, k);
    }
    auto [w, u] = attend(p, h);
    CHECK(seq.graph.graphs[0].data == w.data);

    // identical embeddings at two timepoints give identical graphs
    Embeddings emb2;
    emb2.components = 3;
    emb2.timepoints = 2;
    emb2.width = 4;
    emb2.data.resize(24);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < 4; ++k) {
            const double v = rng.uniform(-1.0, 1.0);
            emb2.data[(i * 2 + 0) * 4 + k] = v;
            emb2.data[(i * 2 + 1) * 4 + k] = v;
        }
    }
    auto seq2 = attend_sequence(p, emb2);
    CHECK(seq2.graph.graphs[0].data == seq2.graph.graphs[1].data);
}

TEST_CASE("attention gradients against finite differences") {
    Rng rng(53);
    auto p = AttentionParams::init(6, 4, rng);
    auto h = make_tensor({4, 6}, std::vector<double>(24), true);
    for (auto& v : h->values) v = rng.uniform(-1.0, 1.0);

    Tape tape;
    auto res = attend_taped(tape, p, h, 1, true);
    auto loss = tape.add(tape.sum_all(tape.hadamard(res.weights, res.weights)), tape.sum_all(res.updated));
    tape.backward(loss);

    auto loss_fn = [&] {
        Tape t(false);
        auto r = attend_taped(t, p, h, 1, true);
        return t.add(t.sum_all(t.hadamard(r.weights, r.weights)), t.sum_all(r.updated))->values[0];
    };
    std::vector<TensorPtr> leaves = p.parameters();
    leaves.push_back(h);
    CHECK(testsupport::finite_difference_check(loss_fn, leaves).max_rel_err <= 1e-4);
}

TEST_CASE("scaled-score variant divides scores by sqrt(d)") {
    Rng rng(61);
    auto p = AttentionParams::init(4, 4, rng);
    auto h = random_matrix(rng, 3, 4);
    auto [w_plain, u1] = attend(p, h, false);
    auto [w_scaled, u2] = attend(p, h, true);
    // scaling compresses scores toward uniform
    double spread_plain = 0.0, spread_scaled = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            spread_plain = std::max(spread_plain, std::abs(w_plain.at(i, j) - 1.0 / 3.0));
            spread_scaled = std::max(spread_scaled, std::abs(w_scaled.at(i, j) - 1.0 / 3.0));
        }
    }
    CHECK(spread_scaled < spread_plain);
}

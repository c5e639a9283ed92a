#include "mf/bench.hpp"

#include <algorithm>
#include <chrono>

#include "mf/manifest.hpp"
#include "mf/matrix.hpp"
#include "mf/rng.hpp"

namespace mf {

namespace {

volatile double g_sink = 0.0;

template <typename F> double median_ns(F&& step, int reps) {
    std::vector<double> times;
    times.reserve(reps);
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const Matrix out = step();
        const auto t1 = std::chrono::steady_clock::now();
        g_sink = g_sink + out(0, 0);
        times.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const size_t m = times.size() / 2;
    return times.size() % 2 == 1 ? times[m] : 0.5 * (times[m - 1] + times[m]);
}

struct Instance {
    Matrix q, k;   // n x d projections (CA inputs)
    Matrix sr, sd; // n x n self similarities (CDA inputs)
};

Instance make_instance(uint64_t seed, int n, int d) {
    Rng rng(seed);
    Instance in;
    in.q = rng.uniform_matrix(n, d, -1.0, 1.0);
    in.k = rng.uniform_matrix(n, d, -1.0, 1.0);
    in.sr = softmax_rows(rng.uniform_matrix(n, n, -1.0, 1.0));
    in.sd = softmax_rows(rng.uniform_matrix(n, n, -1.0, 1.0));
    return in;
}

Matrix ca_similarity(const Instance& in) { return softmax_rows(matmul_nt(in.q, in.k)); }

Matrix cda_similarity(const Instance& in, double eps = 0.6) {
    const Matrix shat_r = sym_normalize(in.sr);
    const Matrix shat_d = sym_normalize(in.sd);
    const Matrix diff = matmul_nt(shat_r, shat_d);
    Matrix out(diff.rows(), diff.cols());
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] = eps * diff.data()[i] + (1.0 - eps) * 0.5 * (in.sr.data()[i] + in.sd.data()[i]);
    return out;
}

} // namespace

std::vector<BenchRow> bench_similarity(uint64_t seed, int n, int d, int reps) {
    const Instance in = make_instance(seed, n, d);
    // warmup
    g_sink = g_sink + ca_similarity(in)(0, 0) + cda_similarity(in)(0, 0);
    std::vector<BenchRow> rows;
    rows.push_back({"ca", n, d, reps, median_ns([&] { return ca_similarity(in); }, reps)});
    rows.push_back({"cda", n, d, reps, median_ns([&] { return cda_similarity(in); }, reps)});
    return rows;
}

CrossoverResult bench_crossover(uint64_t seed, int d, int base_reps) {
    CrossoverResult out;
    for (int n = 16; n <= 1024; n *= 2) {
        const int reps = std::max(3, base_reps * 64 / std::max(64, n));
        auto rows = bench_similarity(seed, n, d, reps);
        const double ca = rows[0].median_ns, cda = rows[1].median_ns;
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
        if (out.crossover_n < 0 && cda >= ca) out.crossover_n = n;
    }
    return out;
}

std::string bench_csv(const std::vector<BenchRow>& rows, int crossover_n) {
    std::string csv = "step,n,d,reps,median_ns\n";
    for (const BenchRow& r : rows)
        csv += r.step + "," + std::to_string(r.n) + "," + std::to_string(r.d) + "," + std::to_string(r.reps) + "," +
               fmt_g17(r.median_ns) + "\n";
    csv += std::string("crossover_n,") + (crossover_n > 0 ? std::to_string(crossover_n) : "none") + ",,,\n";
    return csv;
}

} // namespace mf

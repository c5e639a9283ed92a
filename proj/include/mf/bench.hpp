#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mf {

struct BenchRow {
    std::string step; // "ca" or "cda"
    int n = 0, d = 0, reps = 0;
    double median_ns = 0.0;
};

/// Times only the similarity-matrix step of each mixer: row-softmax of
/// Q K^T for cross-attention versus the symmetric-normalize + blend for
/// cross-diffusion attention. The shared S*V product is excluded.
std::vector<BenchRow> bench_similarity(uint64_t seed, int n, int d, int reps);

struct CrossoverResult {
    std::vector<BenchRow> rows;
    int crossover_n = -1; // smallest swept n where CDA stops being faster
};

/// Sweeps n at fixed d to locate where the n^3 diffusion cost overtakes the
/// n^2 d attention cost.
CrossoverResult bench_crossover(uint64_t seed, int d, int base_reps);

std::string bench_csv(const std::vector<BenchRow>& rows, int crossover_n);

} // namespace mf

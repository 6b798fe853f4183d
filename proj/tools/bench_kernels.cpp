// Benchmark of the sweep kernels: serial reference vs OpenMP, with an
// equality check on every run (the parallel kernels must reproduce the
// serial output bit for bit).
//
//   sdmlab-bench [policies] [mc-samples] [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "sdmlab/generators.hpp"
#include "sdmlab/kernels.hpp"

using namespace sdmlab;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool identical(const std::vector<double>& a, const std::vector<double>& b) {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

} // namespace

int main(int argc, char** argv) {
    uint64_t exact_n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 500'000;
    uint64_t mc_n = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 2'000;
    int threads = argc > 3 ? std::atoi(argv[3]) : 0;
    threads = kernels::resolve_threads(threads);

    // A stochastic train/test pair large enough to keep the sweeps busy.
    RandomMdpConfig mdp_config;
    mdp_config.num_states = 10;
    mdp_config.num_actions = 4;
    mdp_config.max_branching = 3;
    mdp_config.seed = 7;
    std::vector<CsspMdp> mdps{generate_random_mdp(mdp_config)};
    mdp_config.seed = 8;
    mdps.push_back(generate_random_mdp(mdp_config));

    // Conditioning on the transition digest keeps the two MDPs' keys apart;
    // with a bare spec their random applicable sets would have to intersect.
    ContextSpec spec;
    spec.tags = {ContextTag::transition_id};
    KeySpace space(mdps, spec);
    PolicyIndexer indexer(space);
    uint64_t count = indexer.count();
    if (exact_n > count) exact_n = count;

    std::printf("policy space: %llu, sweeping %llu policies, %d thread(s)\n",
                static_cast<unsigned long long>(count),
                static_cast<unsigned long long>(exact_n), threads);

    ExactOptions opts;
    std::vector<double> serial_a(exact_n), serial_b(exact_n);
    std::vector<double> parallel_a(exact_n), parallel_b(exact_n);

    auto t0 = std::chrono::steady_clock::now();
    kernels::exact_quality_sweep_serial(mdps, space, indexer, 0, exact_n, 1, serial_a.data(),
                                        serial_b.data(), opts);
    double serial_s = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    kernels::exact_quality_sweep_parallel(mdps, space, indexer, 0, exact_n, 1, parallel_a.data(),
                                          parallel_b.data(), opts, threads);
    double parallel_s = seconds_since(t0);

    bool exact_ok = identical(serial_a, parallel_a) && identical(serial_b, parallel_b);
    std::printf("exact sweep : serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", serial_s,
                parallel_s, serial_s / parallel_s, exact_ok ? "identical" : "MISMATCH");

    kernels::RolloutOptions ropts;
    std::vector<double> mc_serial_a(mc_n), mc_serial_b(mc_n);
    std::vector<double> mc_parallel_a(mc_n), mc_parallel_b(mc_n);

    t0 = std::chrono::steady_clock::now();
    kernels::mc_quality_sweep_serial(mdps, space, {}, mc_n, 100, 1, {}, 42, ropts,
                                     mc_serial_a.data(), mc_serial_b.data());
    double mc_serial_s = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    kernels::mc_quality_sweep_parallel(mdps, space, {}, mc_n, 100, 1, {}, 42, ropts,
                                       mc_parallel_a.data(), mc_parallel_b.data(), threads);
    double mc_parallel_s = seconds_since(t0);

    bool mc_ok = identical(mc_serial_a, mc_parallel_a) && identical(mc_serial_b, mc_parallel_b);
    std::printf("mc sweep    : serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", mc_serial_s,
                mc_parallel_s, mc_serial_s / mc_parallel_s, mc_ok ? "identical" : "MISMATCH");

    return exact_ok && mc_ok ? 0 : 1;
}

// Times the Lyapunov grid kernels, serial vs OpenMP, on a synthetic trajectory.
// The values are irrelevant for timing purposes; the run doubles as a
// consistency check that both execution paths produce identical reports.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "penflow/diagnostics.hpp"
#include "penflow/problems.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace penflow;

namespace {

Trajectory synthetic_trajectory(const ProblemInstance& pr, const Schedule& s, std::size_t n) {
    Trajectory tr;
    tr.times.resize(n);
    tr.states.resize(n);
    tr.derivs.resize(n);
    tr.lambda_samples.resize(n);
    tr.beta_samples.resize(n);
    tr.bx_norms.resize(n);
    const double h = 0.01;
    for (std::size_t k = 0; k < n; ++k) {
        double t = h * static_cast<double>(k);
        tr.times[k] = t;
        Vec x(pr.dim());
        for (Eigen::Index i = 0; i < pr.dim(); ++i)
            x[i] = std::exp(-1e-3 * t) * std::cos(0.05 * t + 0.7 * static_cast<double>(i));
        tr.states[k] = x;
        tr.derivs[k] = rhs(pr, s, t, x);
        tr.lambda_samples[k] = eval_lambda(s, t);
        tr.beta_samples[k] = eval_beta(s, t);
        tr.bx_norms[k] = eval(pr.B, x).norm();
    }
    tr.last_valid_time = tr.times.back();
    tr.total_steps = static_cast<long>(n);
    return tr;
}

template <typename F>
double best_ms(F&& f, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
        best = std::min(best, ms);
    }
    return best;
}

bool same_report(const LyapunovReport& a, const LyapunovReport& b) {
    if (a.lhs_values.size() != b.lhs_values.size()) return false;
    for (std::size_t k = 0; k < a.lhs_values.size(); ++k)
        if (a.lhs_values[k] != b.lhs_values[k] || a.rhs_values[k] != b.rhs_values[k])
            return false;
    return a.violation_fraction == b.violation_fraction && a.max_violation == b.max_violation;
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n = 1u << 20;
    if (argc > 1) n = static_cast<std::size_t>(std::stoull(argv[1]));

    NamedInstance p1 = builtin("P1");
    Schedule s = canonical_schedule();
    std::printf("building synthetic trajectory with %zu nodes...\n", n);
    Trajectory tr = synthetic_trajectory(p1.instance, s, n);

#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP not enabled in this build\n");
#endif

    LyapunovReport f1_serial, f1_omp;
    double ms1_serial = best_ms([&] {
        f1_serial = check_lemma_fej1(tr, p1.certificate, p1.instance, LemmaMutation::none,
                                     Exec::serial);
    });
    double ms1_omp = best_ms([&] {
        f1_omp = check_lemma_fej1(tr, p1.certificate, p1.instance, LemmaMutation::none,
                                  Exec::openmp);
    });
    std::printf("fej1: serial %8.1f ms | openmp %8.1f ms | speedup %.2fx | identical: %s\n",
                ms1_serial, ms1_omp, ms1_serial / ms1_omp,
                same_report(f1_serial, f1_omp) ? "yes" : "NO");

    LemmaConstants lc = choose_lemma_constants(s, p1.instance.B.mu());
    double t1 = t1_threshold(s, p1.instance.D.eta(), lc.b, lc.t0);
    LyapunovReport f4_serial, f4_omp;
    double ms4_serial = best_ms([&] {
        f4_serial = check_lemma_fej4(tr, p1.certificate, p1.instance, lc, t1,
                                     LemmaMutation::none, Exec::serial);
    });
    double ms4_omp = best_ms([&] {
        f4_omp = check_lemma_fej4(tr, p1.certificate, p1.instance, lc, t1,
                                  LemmaMutation::none, Exec::openmp);
    });
    std::printf("fej4: serial %8.1f ms | openmp %8.1f ms | speedup %.2fx | identical: %s\n",
                ms4_serial, ms4_omp, ms4_serial / ms4_omp,
                same_report(f4_serial, f4_omp) ? "yes" : "NO");

    bool ok = same_report(f1_serial, f1_omp) && same_report(f4_serial, f4_omp);
    return ok ? 0 : 1;
}

// Compares the OpenMP evaluation kernels against the serial reference on a
// large generated instance. On a single core the two should tie; with more
// threads the parallel path should scale on the m-sample reductions.

#include "amsqn/problems.hpp"
#include "amsqn/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>
#include <cstdlib>

using namespace amsqn;

namespace {

template <typename F>
double time_ms(F&& fn, int reps) {
  fn(); // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

} // namespace

int main(int argc, char** argv) {
  const Index m = argc > 1 ? std::atol(argv[1]) : 4000;
  const Index n = argc > 2 ? std::atol(argv[2]) : 800;
  const int reps = argc > 3 ? std::atoi(argv[3]) : 5;

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif

  const auto logreg = problems::gen_logreg(m, n, 30.0, 10.0,
                                           problems::SignalRegime::high, 7);
  const auto xent = problems::gen_xent(m / 10, n / 4, 10, 30.0, 1.0, 7);

  Rng rng(1, Rng::kInit);
  Vector x1(logreg.dimension());
  for (Index i = 0; i < x1.size(); ++i) x1[i] = 0.05 * rng.normal();
  Vector x2(xent.dimension());
  for (Index i = 0; i < x2.size(); ++i) x2[i] = 0.05 * rng.normal();

  struct Row {
    const char* name;
    double serial_ms;
    double parallel_ms;
  };
  const Row rows[] = {
      {"logreg f", time_ms([&] { problems::reference::eval_f(logreg, x1); }, reps),
       time_ms([&] { problems::eval_f(logreg, x1); }, reps)},
      {"logreg grad",
       time_ms([&] { problems::reference::eval_grad(logreg, x1); }, reps),
       time_ms([&] { problems::eval_grad(logreg, x1); }, reps)},
      {"xent f", time_ms([&] { problems::reference::eval_f(xent, x2); }, reps),
       time_ms([&] { problems::eval_f(xent, x2); }, reps)},
      {"xent grad",
       time_ms([&] { problems::reference::eval_grad(xent, x2); }, reps),
       time_ms([&] { problems::eval_grad(xent, x2); }, reps)},
  };

  std::printf("%-12s %12s %12s %8s\n", "kernel", "serial(ms)", "parallel(ms)",
              "speedup");
  for (const auto& r : rows)
    std::printf("%-12s %12.3f %12.3f %7.2fx\n", r.name, r.serial_ms, r.parallel_ms,
                r.serial_ms / r.parallel_ms);
  return 0;
}

// Serial reference kernels against their OpenMP counterparts.
//   expfam_bench [M] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "expfam/experiment.hpp"
#include "expfam/sampler.hpp"
#include "expfam/score_matching.hpp"

using namespace expfam;

namespace {

double best_ms(int repeats, const std::function<void()>& body) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

Model desk_model() {
  const Family fam = Family::all_monomials(3, 2, 2, 4);
  std::vector<std::pair<Factor, double>> w = {
      {Factor({{0, 1}}), 0.1},  {Factor({{1, 1}}), -0.1},          {Factor({{2, 1}}), 0.05},
      {Factor({{0, 2}}), -0.1}, {Factor({{1, 2}}), 0.1},           {Factor({{2, 2}}), 0.1},
      {Factor({{0, 1}, {1, 1}}), 0.3}, {Factor({{1, 1}, {2, 1}}), -0.25}, {Factor({{0, 1}, {2, 1}}), 0.2}};
  return Model(fam, align_theta(fam, w), 1, {1.0, 4});
}

}  // namespace

int main(int argc, char** argv) {
  const int M = argc > 1 ? std::atoi(argv[1]) : 200000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
  const Model model = desk_model();
  const SampleBatch batch = draw_samples(model, M, {1024, 200, 2}, 1);
  const int threads = omp_get_max_threads();

  std::printf("threads %d, M %d\n", threads, M);
  for (int i = 0; i < model.family().n(); ++i) {
    LocalQuadratic a, b;
    const double serial = best_ms(repeats, [&] { a = assemble_quadratic_serial(model.family(), i, batch); });
    const double parallel = best_ms(repeats, [&] { b = assemble_quadratic(model.family(), i, batch); });
    std::printf("assemble_quadratic i=%d  serial %8.2f ms  parallel %8.2f ms  speedup %.2f  max|dH| %.2e\n", i + 1,
                serial, parallel, serial / parallel, (a.H - b.H).cwiseAbs().maxCoeff());
  }

  ExperimentConfig config;
  config.scenario = Scenario::MultilinearTotal;
  config.model = model;
  config.M_grid = {5000};
  config.trials = 8;
  config.seed = 3;
  config.sampler = {1024, 200, 2};
  std::vector<SweepRow> rows_serial, rows_parallel;
  omp_set_num_threads(1);
  const double serial = best_ms(1, [&] { rows_serial = run_sweep(config); });
  omp_set_num_threads(threads);
  const double parallel = best_ms(1, [&] { rows_parallel = run_sweep(config); });
  bool same = rows_serial.size() == rows_parallel.size();
  for (std::size_t r = 0; same && r < rows_serial.size(); ++r) {
    same = rows_serial[r].max_sq_error == rows_parallel[r].max_sq_error;
  }
  std::printf("run_sweep %d trials      serial %8.2f ms  parallel %8.2f ms  speedup %.2f  identical %s\n",
              config.trials, serial, parallel, serial / parallel, same ? "yes" : "no");
  return same ? 0 : 1;
}

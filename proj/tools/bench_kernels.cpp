// Compares the serial reference kernels against the OpenMP variants on the
// shapes the training loop actually runs, and checks they agree bit for bit.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "spes/kernels.hpp"
#include "spes/rng.hpp"

using namespace spes;

namespace {

double now_sec() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::vector<float> random_vec(size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (float& x : v) x = float(rng.normal(0.0, 1.0));
  return v;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    double t0 = now_sec();
    fn();
    best = std::min(best, now_sec() - t0);
  }
  return best;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

void report(const char* name, double gflop, double t_serial, double t_omp, bool equal) {
  std::printf("%-24s serial %8.3f ms (%6.2f GF/s)   omp %8.3f ms (%6.2f GF/s)   x%.2f  %s\n",
              name, t_serial * 1e3, gflop / t_serial, t_omp * 1e3, gflop / t_omp,
              t_serial / t_omp, equal ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1 && std::string(argv[1]) == "--quick") reps = 1;
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns run the serial kernels\n");
#endif
  Rng rng(7);

  {  // conv1d, CNN stem shape
    kernels::Conv1dDims d;
    d.cin = 37;
    d.cout = 64;
    d.k = 7;
    d.t_in = 2030;
    d.stride = 2;
    d.pad = 3;
    d.t_out = kernels::conv1d_out_size(d.t_in, d.k, d.stride, d.pad);
    auto x = random_vec(size_t(d.cin) * d.t_in, rng);
    auto w = random_vec(size_t(d.cout) * d.cin * d.k, rng);
    auto b = random_vec(size_t(d.cout), rng);
    std::vector<float> ys(size_t(d.cout) * d.t_out), yp(ys.size());
    double gflop = 2.0 * d.cout * d.t_out * d.cin * d.k / 1e9;
    double ts = time_best_of(reps, [&] {
      kernels::serial::conv1d_fwd(x.data(), w.data(), b.data(), ys.data(), d);
    });
    double tp = time_best_of(
        reps, [&] { kernels::conv1d_fwd(x.data(), w.data(), b.data(), yp.data(), d); });
    report("conv1d fwd 37x2030", gflop, ts, tp, bitwise_equal(ys, yp));
  }

  {  // conv1d backward wrt parameters
    kernels::Conv1dDims d;
    d.cin = 64;
    d.cout = 64;
    d.k = 7;
    d.t_in = 1015;
    d.stride = 2;
    d.pad = 3;
    d.t_out = kernels::conv1d_out_size(d.t_in, d.k, d.stride, d.pad);
    auto x = random_vec(size_t(d.cin) * d.t_in, rng);
    auto dy = random_vec(size_t(d.cout) * d.t_out, rng);
    std::vector<float> dws(size_t(d.cout) * d.cin * d.k), dbs(size_t(d.cout));
    std::vector<float> dwp(dws.size()), dbp(dbs.size());
    double gflop = 2.0 * d.cout * d.cin * d.k * d.t_out / 1e9;
    double ts = time_best_of(reps, [&] {
      std::fill(dws.begin(), dws.end(), 0.0f);
      std::fill(dbs.begin(), dbs.end(), 0.0f);
      kernels::serial::conv1d_bwd_params(dy.data(), x.data(), dws.data(), dbs.data(), d);
    });
    double tp = time_best_of(reps, [&] {
      std::fill(dwp.begin(), dwp.end(), 0.0f);
      std::fill(dbp.begin(), dbp.end(), 0.0f);
      kernels::conv1d_bwd_params(dy.data(), x.data(), dwp.data(), dbp.data(), d);
    });
    report("conv1d bwd_params", gflop, ts, tp,
           bitwise_equal(dws, dwp) && bitwise_equal(dbs, dbp));
  }

  {  // matmul, attention-sized
    int m = 512, k = 64, n = 512;
    auto a = random_vec(size_t(m) * k, rng);
    auto b = random_vec(size_t(n) * k, rng);
    std::vector<float> cs(size_t(m) * n), cp(cs.size());
    double gflop = 2.0 * m * n * k / 1e9;
    double ts = time_best_of(
        reps, [&] { kernels::serial::matmul_nt(a.data(), b.data(), cs.data(), m, k, n, false); });
    double tp = time_best_of(
        reps, [&] { kernels::matmul_nt(a.data(), b.data(), cp.data(), m, k, n, false); });
    report("matmul_nt 512x64x512", gflop, ts, tp, bitwise_equal(cs, cp));
  }

  {  // softmax rows
    int m = 513, n = 513;
    auto x = random_vec(size_t(m) * n, rng);
    std::vector<float> ys(x.size()), yp(x.size());
    double gflop = 5.0 * m * n / 1e9;
    double ts =
        time_best_of(reps, [&] { kernels::serial::softmax_rows(x.data(), ys.data(), m, n); });
    double tp = time_best_of(reps, [&] { kernels::softmax_rows(x.data(), yp.data(), m, n); });
    report("softmax 513x513", gflop, ts, tp, bitwise_equal(ys, yp));
  }

  return 0;
}

#include <benchmark/benchmark.h>

#include "vicntm/corpus.hpp"
#include "vicntm/matrix.hpp"
#include "vicntm/metrics.hpp"
#include "vicntm/rng.hpp"
#include "vicntm/sampling.hpp"
#include "vicntm/synthetic.hpp"
#include "vicntm/ntm.hpp"
#include "vicntm/vicreg.hpp"

using namespace vicntm;

namespace {

Matrix random_matrix(int r, int c, uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-1, 1);
  return m;
}

struct BenchData {
  Vocabulary vocab;
  BowMatrix bow;
  TfIdfStats tfidf;
  CoocCounts cooc;
};

// One reusable corpus for the data-path benchmarks.
const BenchData& bench_data() {
  static BenchData d = [] {
    BenchData out;
    auto docs = synthesize_corpus(SyntheticSpec::toy(2000, 99));
    out.vocab = build_vocabulary(docs, 2, 0.8, {});
    auto vr = vectorize_and_filter(docs, out.vocab, 2);
    out.bow = std::move(vr.bow);
    out.tfidf = compute_tfidf(out.bow);
    out.cooc = count_cooc(out.bow);
    return out;
  }();
  return d;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  int n = int(state.range(0));
  Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Matrix c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

static void BM_SoftmaxRows(benchmark::State& state) {
  Matrix x = random_matrix(200, int(state.range(0)), 3);
  for (auto _ : state) {
    Matrix s = softmax_rows(x);
    benchmark::DoNotOptimize(s.data.data());
  }
}
BENCHMARK(BM_SoftmaxRows)->Arg(50)->Arg(2000);

static void BM_Batchnorm(benchmark::State& state) {
  Matrix x = random_matrix(200, int(state.range(0)), 4);
  Matrix scale = Matrix::full(1, x.cols, 1.0), shift = Matrix::zeros(1, x.cols);
  for (auto _ : state) {
    BnStats stats = BnStats::fresh(x.cols);
    Matrix y = batchnorm(x, scale, shift, true, stats);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(BM_Batchnorm)->Arg(50)->Arg(500);

static void BM_VicLoss(benchmark::State& state) {
  int n = int(state.range(0));
  Matrix y = random_matrix(n, 50, 5), yp = random_matrix(n, 50, 6);
  VicWeights w;
  for (auto _ : state) {
    VicBreakdown b = vic_loss(y, yp, w);
    benchmark::DoNotOptimize(b.total);
  }
}
BENCHMARK(BM_VicLoss)->Arg(50)->Arg(500);

static void BM_TfidfPositive(benchmark::State& state) {
  const auto& d = bench_data();
  Matrix rows = d.bow.dense_all();
  Matrix recon = Matrix::full(rows.rows, rows.cols, 0.01);
  for (auto _ : state) {
    Matrix xp = tfidf_positive(rows, recon, d.tfidf.idf, 5);
    benchmark::DoNotOptimize(xp.data.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * rows.rows);
}
BENCHMARK(BM_TfidfPositive);

static void BM_Npmi(benchmark::State& state) {
  const auto& d = bench_data();
  Rng rng(7);
  TopicSet topics;
  topics.n = 10;
  topics.topics.resize(20);
  for (auto& t : topics.topics) {
    for (int i = 0; i < 10; ++i) t.push_back(rng.uniform_int(d.vocab.size()));
  }
  for (auto _ : state) {
    // Copy defeats the co-occurrence cache so each iteration pays full cost.
    CoocCounts counts = d.cooc;
    NpmiResult r = npmi(topics, counts);
    benchmark::DoNotOptimize(r.mean);
  }
}
BENCHMARK(BM_Npmi);

BENCHMARK_MAIN();

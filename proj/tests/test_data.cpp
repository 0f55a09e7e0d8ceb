#include <doctest.h>
#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <omic/data.hpp>

#include "test_util.hpp"

using namespace omic;
using namespace omic::testutil;

TEST_SUITE_BEGIN("data");

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("omic_data_" + name) {
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("triplets: three records with inferred dimensions") {
  TempFile f("basic.tsv", "1\t10\t4.0\n2\t11\t3.5\n1\t11\t2.0\n");
  const TripletData data = load_triplets(f.path);
  CHECK(data.observations.rows == 2);
  CHECK(data.observations.cols == 2);
  CHECK(data.observations.nnz() == 3);
  CHECK(data.user_ids == std::vector<std::string>{"1", "2"});
  CHECK(*data.user_index("2") == 1);
  CHECK_FALSE(data.item_index("99").has_value());
}

TEST_CASE("triplets: duplicates are retained") {
  TempFile f("dup.csv", "a,x,1\na,x,2\n");
  const TripletData data = load_triplets(f.path);
  CHECK(data.observations.nnz() == 2);
}

TEST_CASE("triplets: double-colon delimiter and extra fields") {
  TempFile f("ml.dat", "1::1193::5::978300760\n1::661::3::978302109\n");
  const TripletData data = load_triplets(f.path);
  CHECK(data.observations.nnz() == 2);
  CHECK(data.observations.entries[0].v == doctest::Approx(5.0));
}

TEST_CASE("triplets: header line is skipped") {
  TempFile f("head.csv", "user,item,rating\n7,8,2.5\n");
  const TripletData data = load_triplets(f.path);
  CHECK(data.observations.nnz() == 1);
}

TEST_CASE("triplets: malformed line reports its number") {
  TempFile f("bad.tsv", "1\t2\t3.0\nmangled\n");
  try {
    load_triplets(f.path);
    CHECK(false);
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("triplets: empty file is an error") {
  TempFile f("empty.tsv", "");
  CHECK_THROWS_AS(load_triplets(f.path), InvalidInput);
}

TEST_CASE("triplets: gzip input by extension") {
  const std::string inner = "1\t1\t4.0\n2\t2\t3.0\n";
  TempFile plain("gzsrc.tsv", inner);
  const std::string gzpath = "omic_data_test.tsv.gz";
  gzFile gz = gzopen(gzpath.c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzwrite(gz, inner.data(), static_cast<unsigned>(inner.size()));
  gzclose(gz);
  const TripletData data = load_triplets(gzpath);
  CHECK(data.observations.nnz() == 2);
  std::remove(gzpath.c_str());
}

TEST_CASE("communities: two labels") {
  TempFile f("comm.tsv", "0\tA\n1\tA\n2\tB\n3\tB\n");
  const CommunityAssignment comm = load_communities(f.path);
  CHECK(comm.size == 4);
  CHECK(comm.num_communities == 2);
  CHECK(comm.community_of[0] == comm.community_of[1]);
  CHECK(comm.community_of[0] != comm.community_of[2]);
}

TEST_CASE("communities: missing id is a coverage error") {
  TempFile f("gap.tsv", "0\tA\n1\tA\n3\tB\n");
  CHECK_THROWS_AS(load_communities(f.path), InvalidInput);
}

TEST_CASE("communities: string labels get lexicographic ids") {
  TempFile f("lex.tsv", "0\tzebra\n1\talpha\n2\tmid\n");
  const RawCommunities raw = load_communities_raw(f.path);
  CHECK(raw.label_of_id.at("1") == 0);  // alpha
  CHECK(raw.label_of_id.at("2") == 1);  // mid
  CHECK(raw.label_of_id.at("0") == 2);  // zebra
}

TEST_CASE("communities: conflicting duplicate ids are rejected") {
  TempFile f("conflict.tsv", "0\tA\n0\tB\n1\tA\n");
  CHECK_THROWS_AS(load_communities_raw(f.path), InvalidInput);
}

TEST_CASE("split: largest-remainder sizes and determinism") {
  Rng rng(101);
  SparseObservations obs(40, 40);
  for (int t = 0; t < 1000; ++t)
    obs.add(static_cast<Index>(rng.uniform_index(40)),
            static_cast<Index>(rng.uniform_index(40)), rng.gaussian());
  const SplitResult s1 = split(obs, 0.85, 0.10, 0.05, 42);
  CHECK(s1.train.nnz() == 850);
  CHECK(s1.validation.nnz() == 100);
  CHECK(s1.test.nnz() == 50);
  const SplitResult s2 = split(obs, 0.85, 0.10, 0.05, 42);
  for (Index t = 0; t < 850; ++t) {
    CHECK(s1.train.entries[t].i == s2.train.entries[t].i);
    CHECK(s1.train.entries[t].j == s2.train.entries[t].j);
  }
  const SplitResult all = split(obs, 1.0, 0.0, 0.0, 7);
  CHECK(all.train.nnz() == 1000);
  CHECK(all.test.nnz() == 0);
  CHECK_THROWS_AS(split(obs, 0.5, 0.2, 0.2, 1), InvalidInput);
}

TEST_CASE("synthetic generator: structural identities") {
  const SyntheticInstance inst = gen_synthetic(0.6, 4, 0.3, 100, 100, 100.0, 3);

  // G and S rebuilt from their definitions.
  const Index m = 100, n = 100;
  Vector a(m), b(n);
  for (Index i = 0; i < m; ++i) a[i] = static_cast<double>(i + 1) - (m + 1) / 2.0;
  for (Index j = 0; j < n; ++j) b[j] = static_cast<double>(j + 1) - (n + 1) / 2.0;
  a /= a.norm();
  b /= b.norm();
  const Vector v1 = Vector::Constant(m, 0.1);
  const Vector v2 = Vector::Constant(n, 0.1);
  const Matrix g = 0.5 * a * v2.transpose() + 0.5 * v1 * b.transpose();
  Matrix s(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      s(i, j) = ((i < 50) == (j < 50)) ? 1e-4 : -1e-4;
  const Matrix expected = 0.6 * 100.0 * g + 0.4 * 100.0 * s;
  CHECK((inst.full - expected).cwiseAbs().maxCoeff() <= 1e-12);

  // Sampling counts: gamma/(gamma+1) of the budget in the top half.
  CHECK(inst.top_half_count == 2400);
  CHECK(inst.observed.nnz() == 3000);
  Index top = 0;
  for (const auto& e : inst.observed.entries) top += e.i < 50 ? 1 : 0;
  CHECK(top == 2400);
}

TEST_CASE("synthetic generator: alpha = 1 is rank two") {
  const SyntheticInstance inst = gen_synthetic(1.0, 1, 0.2, 40, 40, 40.0, 5);
  const LowRankFactor f = full_svd(inst.full);
  CHECK(f.d[0] > 1e-8);
  CHECK(f.d[2] <= 1e-10);
}

TEST_CASE("synthetic generator: gamma = 1 samples the halves equally") {
  const SyntheticInstance inst = gen_synthetic(0.5, 1, 0.4, 60, 60, 60.0, 9);
  Index top = 0;
  for (const auto& e : inst.observed.entries) top += e.i < 30 ? 1 : 0;
  CHECK(top == inst.observed.nnz() - top);
}

TEST_CASE("synthetic generator: determinism and validation") {
  const SyntheticInstance a = gen_synthetic(0.3, 4, 0.25, 20, 20, 10.0, 11);
  const SyntheticInstance b = gen_synthetic(0.3, 4, 0.25, 20, 20, 10.0, 11);
  CHECK((a.full - b.full).norm() == 0.0);
  REQUIRE(a.observed.nnz() == b.observed.nnz());
  for (Index t = 0; t < a.observed.nnz(); ++t) {
    CHECK(a.observed.entries[t].i == b.observed.entries[t].i);
    CHECK(a.observed.entries[t].j == b.observed.entries[t].j);
  }
  CHECK_THROWS_AS(gen_synthetic(0.5, 1, 0.5, 21, 20, 10.0, 1), InvalidInput);
  CHECK_THROWS_AS(gen_synthetic(1.5, 1, 0.5, 20, 20, 10.0, 1), InvalidInput);
}

TEST_CASE("bound matrix: C = 0 keeps community-resolution Rademacher blocks") {
  const BoundInstance inst = gen_bound_matrix(4, 3, 0.0, 16, 2);
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 16; ++j) {
      CHECK(std::abs(std::abs(inst.full(i, j)) - 1.0) <= 1e-14);
      // Block-constant within community pairs.
      const Index bi = i / 4 * 4, bj = j / 4 * 4;
      CHECK(inst.full(i, j) == inst.full(bi, bj));
    }
}

TEST_CASE("bound matrix: a = m gives a full-resolution Rademacher matrix") {
  const BoundInstance inst = gen_bound_matrix(12, 2, 0.0, 12, 4);
  Matrix distinct = inst.full;
  bool varies = false;
  for (Index i = 1; i < 12; ++i) varies |= distinct(i, 0) != distinct(0, 0);
  CHECK(varies);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j)
      CHECK(std::abs(std::abs(inst.full(i, j)) - 1.0) <= 1e-14);
}

TEST_CASE("bound matrix: residual obeys the max-normalized scale") {
  const BoundInstance inst = gen_bound_matrix(4, 3, 1.5, 32, 6);
  CHECK(inst.full.cwiseAbs().maxCoeff() <= 1.0 + 1.5 + 1e-12);
  CHECK_THROWS_AS(gen_bound_matrix(5, 2, 1.0, 32, 1), InvalidInput);
}

TEST_CASE("entry ordering: checkerboard keeps only matching parities") {
  const auto cells = entry_ordering(6, 6, SamplingMode::kCheckerboard, 3);
  CHECK(cells.size() == 18);
  for (const auto& [i, j] : cells) CHECK(i % 2 == j % 2);
  const auto uniform = entry_ordering(6, 6, SamplingMode::kUniform, 3);
  CHECK(uniform.size() == 36);
}

TEST_SUITE_END();

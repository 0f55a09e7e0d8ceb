#include "omic/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>

#include "omic/bases.hpp"
#include "omic/rng.hpp"

namespace omic {

namespace {

// Reads a whole file into lines, transparently gunzipping *.gz.
std::vector<std::string> read_lines(const std::string& path) {
  std::string content;
  if (path.size() > 3 && path.substr(path.size() - 3) == ".gz") {
    gzFile gz = gzopen(path.c_str(), "rb");
    require(gz != nullptr, "cannot open '" + path + "'");
    char buf[1 << 16];
    int got = 0;
    while ((got = gzread(gz, buf, sizeof(buf))) > 0) content.append(buf, got);
    const bool bad = got < 0;
    gzclose(gz);
    require(!bad, "failed to decompress '" + path + "'");
  } else {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open '" + path + "'");
    content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (end == content.size()) break;
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  // Delimiter priority: "::", tab, comma, then runs of spaces.
  std::vector<std::string> fields;
  std::string sep;
  if (line.find("::") != std::string::npos)
    sep = "::";
  else if (line.find('\t') != std::string::npos)
    sep = "\t";
  else if (line.find(',') != std::string::npos)
    sep = ",";

  if (sep.empty()) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ') ++j;
      if (j > i) fields.push_back(line.substr(i, j - i));
      i = j;
    }
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(sep, start);
    fields.push_back(line.substr(start, end == std::string::npos ? std::string::npos
                                                                 : end - start));
    if (end == std::string::npos) break;
    start = end + sep.size();
  }
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::optional<Index> TripletData::user_index(const std::string& id) const {
  if (user_lookup_.empty())
    for (std::size_t i = 0; i < user_ids.size(); ++i)
      user_lookup_[user_ids[i]] = static_cast<Index>(i);
  auto it = user_lookup_.find(id);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<Index> TripletData::item_index(const std::string& id) const {
  if (item_lookup_.empty())
    for (std::size_t i = 0; i < item_ids.size(); ++i)
      item_lookup_[item_ids[i]] = static_cast<Index>(i);
  auto it = item_lookup_.find(id);
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

TripletData load_triplets(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  require(!lines.empty(), "'" + path + "' is empty");

  TripletData out;
  std::map<std::string, Index> users, items;
  struct Raw {
    Index i, j;
    double v;
  };
  std::vector<Raw> raws;
  raws.reserve(lines.size());

  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::vector<std::string> fields = split_fields(stripped);
    double v = 0.0;
    if (fields.size() < 3 || !parse_double(trim(fields[2]), v)) {
      // A single unparsable first record is treated as a header.
      if (ln == 0 && fields.size() >= 3) continue;
      throw InvalidInput(path + ":" + std::to_string(ln + 1) + ": malformed record");
    }
    const std::string uid = trim(fields[0]), iid = trim(fields[1]);
    require(!uid.empty() && !iid.empty(),
            path + ":" + std::to_string(ln + 1) + ": malformed record");
    auto [uit, unew] = users.try_emplace(uid, static_cast<Index>(out.user_ids.size()));
    if (unew) out.user_ids.push_back(uid);
    auto [iit, inew] = items.try_emplace(iid, static_cast<Index>(out.item_ids.size()));
    if (inew) out.item_ids.push_back(iid);
    raws.push_back({uit->second, iit->second, v});
  }
  require(!raws.empty(), "'" + path + "' contains no records");

  out.observations = SparseObservations(static_cast<Index>(out.user_ids.size()),
                                        static_cast<Index>(out.item_ids.size()));
  for (const Raw& r : raws) out.observations.add(r.i, r.j, r.v);
  return out;
}

RawCommunities load_communities_raw(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  require(!lines.empty(), "'" + path + "' is empty");

  RawCommunities out;
  std::map<std::string, std::string> label_names;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string stripped = trim(lines[ln]);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::vector<std::string> fields = split_fields(stripped);
    if (fields.size() < 2)
      throw InvalidInput(path + ":" + std::to_string(ln + 1) + ": expected 'id label'");
    const std::string id = trim(fields[0]), label = trim(fields[1]);
    auto it = label_names.find(id);
    if (it != label_names.end()) {
      require(it->second == label, path + ":" + std::to_string(ln + 1) +
                                       ": id '" + id + "' has conflicting labels");
      continue;
    }
    label_names[id] = label;
  }
  require(!label_names.empty(), "'" + path + "' contains no records");

  // Deterministic label ids: lexicographic order of label strings.
  std::vector<std::string> labels;
  for (const auto& [id, label] : label_names) labels.push_back(label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::map<std::string, int> label_index;
  for (std::size_t i = 0; i < labels.size(); ++i)
    label_index[labels[i]] = static_cast<int>(i);

  for (const auto& [id, label] : label_names)
    out.label_of_id[id] = label_index[label];
  out.num_labels = static_cast<int>(labels.size());
  return out;
}

CommunityAssignment bind_communities(const RawCommunities& raw,
                                     const std::vector<std::string>& universe) {
  require(!universe.empty(), "empty id universe");
  std::vector<int> assignment(universe.size());
  for (std::size_t i = 0; i < universe.size(); ++i) {
    auto it = raw.label_of_id.find(universe[i]);
    if (it == raw.label_of_id.end())
      throw InvalidInput("community file does not cover id '" + universe[i] + "'");
    assignment[i] = it->second;
  }
  // Relabel densely in case some labels are unused by this universe.
  std::vector<int> remap(raw.num_labels, -1);
  int next = 0;
  for (int lbl : assignment)
    if (remap[lbl] < 0) remap[lbl] = next++;
  for (int& lbl : assignment) lbl = remap[lbl];
  return CommunityAssignment(static_cast<Index>(universe.size()), std::move(assignment));
}

CommunityAssignment load_communities(const std::string& path) {
  const RawCommunities raw = load_communities_raw(path);
  Index max_id = -1;
  for (const auto& [id, lbl] : raw.label_of_id) {
    Index value = 0;
    auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), value);
    require(ec == std::errc() && ptr == id.data() + id.size() && value >= 0,
            "community id '" + id + "' is not a nonnegative integer");
    max_id = std::max(max_id, value);
  }
  std::vector<std::string> universe;
  universe.reserve(max_id + 1);
  for (Index i = 0; i <= max_id; ++i) universe.push_back(std::to_string(i));
  return bind_communities(raw, universe);
}

SplitResult split(const SparseObservations& obs, double train_ratio,
                  double validation_ratio, double test_ratio, std::uint64_t seed) {
  const double ratios[3] = {train_ratio, validation_ratio, test_ratio};
  double sum = 0.0;
  for (double r : ratios) {
    require(r >= 0.0 && r <= 1.0, "split ratios must lie in [0, 1]");
    sum += r;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "split ratios must sum to 1");

  const Index n = obs.nnz();
  // Largest-remainder rounding of the three shares.
  Index sizes[3];
  double remainders[3];
  Index assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = ratios[s] * static_cast<double>(n);
    sizes[s] = static_cast<Index>(std::floor(exact));
    remainders[s] = exact - std::floor(exact);
    assigned += sizes[s];
  }
  int order[3] = {0, 1, 2};
  std::sort(order, order + 3, [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (int s = 0; assigned < n; ++s, ++assigned) sizes[order[s % 3]] += 1;

  std::vector<Index> perm(n);
  for (Index i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);

  SplitResult out{SparseObservations(obs.rows, obs.cols),
                  SparseObservations(obs.rows, obs.cols),
                  SparseObservations(obs.rows, obs.cols)};
  SparseObservations* parts[3] = {&out.train, &out.validation, &out.test};
  Index at = 0;
  for (int s = 0; s < 3; ++s)
    for (Index t = 0; t < sizes[s]; ++t, ++at) {
      const auto& e = obs.entries[perm[at]];
      parts[s]->add(e.i, e.j, e.v);
    }
  return out;
}

SyntheticInstance gen_synthetic(double alpha, int gamma, double p_obs, Index m,
                                Index n, double c, std::uint64_t seed) {
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(gamma >= 1, "gamma must be a positive integer");
  require(p_obs > 0.0 && p_obs <= 1.0, "p_obs must lie in (0, 1]");
  require(m >= 2 && n >= 2 && m % 2 == 0 && n % 2 == 0, "m and n must be even");

  Vector a(m), b(n);
  for (Index i = 0; i < m; ++i) a[i] = static_cast<double>(i + 1) - (m + 1) / 2.0;
  for (Index j = 0; j < n; ++j) b[j] = static_cast<double>(j + 1) - (n + 1) / 2.0;
  a /= a.norm();
  b /= b.norm();
  const Vector v1 = Vector::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
  const Vector v2 = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));

  const Matrix g = 0.5 * a * v2.transpose() + 0.5 * v1 * b.transpose();
  Matrix s(m, n);
  const double cell = 1.0 / (static_cast<double>(m) * static_cast<double>(n));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      s(i, j) = ((i < m / 2) == (j < n / 2)) ? cell : -cell;

  SyntheticInstance out;
  out.full = alpha * c * g + (1.0 - alpha) * c * s;
  out.alpha = alpha;
  out.gamma = gamma;
  out.p_obs = p_obs;
  out.c = c;
  out.seed = seed;

  const double budget = p_obs * static_cast<double>(m) * static_cast<double>(n);
  const auto top_count = static_cast<Index>(std::llround(
      static_cast<double>(gamma) * budget / static_cast<double>(gamma + 1)));
  const auto bottom_count =
      static_cast<Index>(std::llround(budget / static_cast<double>(gamma + 1)));
  const Index half_capacity = (m / 2) * n;
  require(top_count <= half_capacity && bottom_count <= half_capacity,
          "sampling budget exceeds half-matrix capacity");
  out.top_half_count = top_count;

  Rng rng(seed);
  auto sample_half = [&](Index row_offset, Index count) {
    std::vector<Index> cells(half_capacity);
    for (Index t = 0; t < half_capacity; ++t) cells[t] = t;
    // Partial Fisher-Yates: the first `count` slots are a uniform sample.
    for (Index t = 0; t < count; ++t) {
      const Index j = t + static_cast<Index>(rng.uniform_index(half_capacity - t));
      std::swap(cells[t], cells[j]);
    }
    for (Index t = 0; t < count; ++t) {
      const Index i = row_offset + cells[t] / n;
      const Index j = cells[t] % n;
      out.observed.add(i, j, out.full(i, j));
    }
  };
  out.observed = SparseObservations(m, n);
  sample_half(0, top_count);
  sample_half(m / 2, bottom_count);
  return out;
}

BoundInstance gen_bound_matrix(int a, int r, double C, Index m, std::uint64_t seed) {
  require(a >= 1 && a <= m, "community count out of range");
  require(r >= 1, "residual rank must be positive");
  require(C >= 0.0, "residual scale must be nonnegative");
  require(m % a == 0, "equal-size communities require m divisible by a");

  BoundInstance out;
  out.a = a;
  out.r = r;
  out.C = C;
  out.users = CommunityAssignment::equal_blocks(m, a);
  out.items = CommunityAssignment::equal_blocks(m, a);

  Rng rng(seed);
  // Community x community component with iid Rademacher entries.
  Matrix eps(a, a);
  for (int u = 0; u < a; ++u)
    for (int v = 0; v < a; ++v) eps(u, v) = rng.next_u64() & 1 ? 1.0 : -1.0;
  Matrix full(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      full(i, j) = eps(out.users.community_of[i], out.items.community_of[j]);

  if (C > 0.0 && m > a) {
    const Index res = m - a;
    Matrix vr(res, r), wr(res, r);
    const double sd = 1.0 / std::sqrt(static_cast<double>(res));
    for (Index i = 0; i < res; ++i)
      for (int t = 0; t < r; ++t) vr(i, t) = sd * rng.gaussian();
    for (Index i = 0; i < res; ++i)
      for (int t = 0; t < r; ++t) wr(i, t) = sd * rng.gaussian();

    // Push the rank-r slab into the complement subspace on both sides.
    const BasisSide side = BasisSide::omicplus(out.users);
    const Matrix& x2 = side.materialized(1);  // m x (m - a)
    Matrix residual = x2 * (vr * wr.transpose()) * x2.transpose();
    const double peak = residual.cwiseAbs().maxCoeff();
    if (peak > 0.0) residual /= peak;
    full += C * residual;
  }
  out.full = std::move(full);
  return out;
}

std::vector<std::pair<Index, Index>> entry_ordering(Index m, Index n,
                                                    SamplingMode mode,
                                                    std::uint64_t seed) {
  std::vector<std::pair<Index, Index>> cells;
  cells.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(n));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      if (mode == SamplingMode::kUniform || (i % 2) == (j % 2)) cells.emplace_back(i, j);
  Rng rng(seed);
  rng.shuffle(cells);
  return cells;
}

}  // namespace omic

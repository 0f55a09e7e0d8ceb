#include "omic/model.hpp"

#include <bit>
#include <cstdio>
#include <map>
#include <memory>

#include <json.hpp>

namespace omic {

using nlohmann::json;

BasisFamily FamilyDescriptor::build() const {
  switch (kind) {
    case FamilyKind::kSoftImpute:
      return BasisFamily::softimpute(m, n);
    case FamilyKind::kBomic:
      return BasisFamily::bomic(m, n);
    case FamilyKind::kOmicPlus:
      require(users && items, "omicplus family needs community assignments");
      return BasisFamily::omicplus(*users, *items);
    case FamilyKind::kBomicPlus:
      require(users && items, "bomicplus family needs community assignments");
      return BasisFamily::bomicplus(*users, *items);
    case FamilyKind::kExplicit:
      return BasisFamily(
          FamilyKind::kExplicit,
          BasisSide::explicit_blocks(m, explicit_row_blocks, explicit_residual_rows),
          BasisSide::explicit_blocks(n, explicit_col_blocks, explicit_residual_cols));
  }
  throw ContractViolation("unknown family kind");
}

FittedModel::FittedModel(FamilyDescriptor desc, DenseComponents cores,
                         HyperParams params, FitMeta meta)
    : desc_(std::move(desc)),
      family_(desc_.build()),
      storage_(Storage::kDense),
      cores_(std::move(cores)),
      params_(std::move(params)),
      meta_(std::move(meta)) {
  require(cores_.K == family_.K() && cores_.L == family_.L(),
          "model: component shape mismatch");
  for (int k = 0; k < cores_.K; ++k)
    for (int l = 0; l < cores_.L; ++l)
      if (!cores_.empty(k, l))
        require(cores_.at(k, l).rows() == family_.row_side().block(k).width &&
                    cores_.at(k, l).cols() == family_.col_side().block(l).width,
                "model: core shape does not match basis widths");
  init_predictors();
}

FittedModel::FittedModel(FamilyDescriptor desc, FactorComponents factors,
                         HyperParams params, FitMeta meta)
    : desc_(std::move(desc)),
      family_(desc_.build()),
      storage_(Storage::kFactor),
      factors_(std::move(factors)),
      params_(std::move(params)),
      meta_(std::move(meta)) {
  require(factors_.K == family_.K() && factors_.L == family_.L(),
          "model: component shape mismatch");
  init_predictors();
}

void FittedModel::init_predictors() {
  const int K = family_.K(), L = family_.L();
  cell_left_.assign(K * L, RowMatrix());
  if (storage_ == Storage::kDense) {
    block_right_.resize(L);
    for (int l = 0; l < L; ++l) {
      if (family_.col_side().block(l).width == 0) continue;
      block_right_[l] = family_.col_side().is_identity()
                            ? RowMatrix(RowMatrix::Identity(desc_.n, desc_.n))
                            : RowMatrix(family_.col_side().materialized(l));
    }
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) {
        if (cores_.empty(k, l)) continue;
        const Matrix& m = cores_.at(k, l);
        cell_left_[k * L + l] = family_.row_side().is_identity()
                                    ? RowMatrix(m)
                                    : RowMatrix(family_.row_side().materialized(k) * m);
      }
  } else {
    cell_right_.assign(K * L, RowMatrix());
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) {
        const LowRankFactor& f = factors_.at(k, l);
        if (f.rank() == 0) continue;
        cell_left_[k * L + l] = RowMatrix(f.U * f.d.asDiagonal());
        cell_right_[k * L + l] = RowMatrix(f.V);
      }
  }
}

double FittedModel::cell_value(int k, int l, Index i, Index j) const {
  const int L = family_.L();
  const RowMatrix& left = cell_left_[k * L + l];
  if (left.size() == 0) return 0.0;
  if (storage_ == Storage::kDense)
    return left.row(i).dot(block_right_[l].row(j));
  return left.row(i).dot(cell_right_[k * L + l].row(j));
}

double FittedModel::predict(Index i, Index j) const {
  require(i >= 0 && i < rows() && j >= 0 && j < cols(),
          "predict: index out of range");
  double sum = 0.0;
  for (int k = 0; k < family_.K(); ++k)
    for (int l = 0; l < family_.L(); ++l) sum += cell_value(k, l, i, j);
  return sum;
}

Matrix FittedModel::explain_entry(Index i, Index j) const {
  require(i >= 0 && i < rows() && j >= 0 && j < cols(),
          "explain_entry: index out of range");
  Matrix out = Matrix::Zero(family_.K(), family_.L());
  for (int k = 0; k < family_.K(); ++k)
    for (int l = 0; l < family_.L(); ++l) out(k, l) = cell_value(k, l, i, j);
  return out;
}

Matrix FittedModel::component_norms() const {
  return storage_ == Storage::kDense ? cores_.norms() : factors_.norms();
}

FittedModel::Biases FittedModel::extract_biases() const {
  const auto& rows_side = family_.row_side();
  const auto& cols_side = family_.col_side();
  require(rows_side.block(0).kind == BlockKind::kGlobalMean &&
              cols_side.block(0).kind == BlockKind::kGlobalMean,
          "extract_biases: family has no global-mean blocks");

  Biases b;
  b.global = cell_value(0, 0, 0, 0);
  b.user = Vector::Zero(rows());
  b.item = Vector::Zero(cols());
  for (int k = 1; k < family_.K(); ++k)
    for (Index i = 0; i < rows(); ++i) b.user[i] += cell_value(k, 0, i, 0);
  for (int l = 1; l < family_.L(); ++l)
    for (Index j = 0; j < cols(); ++j) b.item[j] += cell_value(0, l, 0, j);
  return b;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr char kMagic[] = "omic-model/1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

void write_bytes(std::FILE* f, const void* data, std::size_t bytes) {
  if (bytes && std::fwrite(data, 1, bytes, f) != bytes)
    throw InvalidInput("model save: write failed");
}

void read_bytes(std::FILE* f, void* data, std::size_t bytes) {
  if (bytes && std::fread(data, 1, bytes, f) != bytes)
    throw InvalidInput("model file corrupt: unexpected end of file");
}

json array_entry(const std::string& name, const std::string& kind, Index rows,
                 Index cols) {
  return json{{"name", name}, {"kind", kind}, {"rows", rows}, {"cols", cols}};
}

FamilyKind family_kind_from(const std::string& s) {
  if (s == "softimpute") return FamilyKind::kSoftImpute;
  if (s == "bomic") return FamilyKind::kBomic;
  if (s == "omicplus") return FamilyKind::kOmicPlus;
  if (s == "bomicplus") return FamilyKind::kBomicPlus;
  if (s == "explicit") return FamilyKind::kExplicit;
  throw InvalidInput("model file corrupt: unknown family kind '" + s + "'");
}

}  // namespace

void FittedModel::save(const std::string& path) const {
  static_assert(std::endian::native == std::endian::little,
                "model files are little-endian");
  json header;
  header["format"] = "omic-model/1";
  header["storage"] = storage_ == Storage::kDense ? "dense" : "factor";
  header["K"] = family_.K();
  header["L"] = family_.L();

  json fam;
  fam["kind"] = to_string(desc_.kind);
  fam["m"] = desc_.m;
  fam["n"] = desc_.n;
  json arrays = json::array();
  std::vector<std::pair<const void*, std::size_t>> blobs;

  auto add_f64 = [&](const std::string& name, const Matrix& m) {
    arrays.push_back(array_entry(name, "f64", m.rows(), m.cols()));
    blobs.emplace_back(m.data(), sizeof(double) * m.size());
  };
  auto add_vec = [&](const std::string& name, const Vector& v) {
    arrays.push_back(array_entry(name, "f64", v.size(), 1));
    blobs.emplace_back(v.data(), sizeof(double) * v.size());
  };

  std::vector<std::vector<std::int64_t>> int_buffers;
  auto add_communities = [&](const std::string& side,
                             const CommunityAssignment& comm) {
    fam[side] = json{{"num_communities", comm.num_communities},
                     {"digest", comm.digest()}};
    auto& buf = int_buffers.emplace_back();
    buf.reserve(comm.community_of.size());
    for (int c : comm.community_of) buf.push_back(c);
    arrays.push_back(array_entry(side + ".community_of", "i64",
                                 static_cast<Index>(buf.size()), 1));
  };
  if (desc_.users) add_communities("users", *desc_.users);
  if (desc_.items) add_communities("items", *desc_.items);
  if (desc_.kind == FamilyKind::kExplicit) {
    fam["row_residual"] = desc_.explicit_residual_rows;
    fam["col_residual"] = desc_.explicit_residual_cols;
    fam["num_row_blocks"] = desc_.explicit_row_blocks.size();
    fam["num_col_blocks"] = desc_.explicit_col_blocks.size();
    for (std::size_t b = 0; b < desc_.explicit_row_blocks.size(); ++b)
      add_f64("explicit.row." + std::to_string(b), desc_.explicit_row_blocks[b]);
    for (std::size_t b = 0; b < desc_.explicit_col_blocks.size(); ++b)
      add_f64("explicit.col." + std::to_string(b), desc_.explicit_col_blocks[b]);
  }
  header["family"] = fam;

  json lam = json::array();
  for (int k = 0; k < params_.K(); ++k) {
    json row = json::array();
    for (int l = 0; l < params_.L(); ++l) {
      if (params_.finite(k, l))
        row.push_back(params_(k, l));
      else
        row.push_back(nullptr);
    }
    lam.push_back(row);
  }
  header["lambda"] = lam;
  header["meta"] = json{{"seed", meta_.seed},
                        {"iterations", meta_.iterations},
                        {"objective", meta_.objective},
                        {"solver", meta_.solver}};
  if (!user_ids.empty()) header["user_ids"] = user_ids;
  if (!item_ids.empty()) header["item_ids"] = item_ids;

  if (storage_ == Storage::kDense) {
    for (int k = 0; k < cores_.K; ++k)
      for (int l = 0; l < cores_.L; ++l)
        if (!cores_.empty(k, l))
          add_f64("core." + std::to_string(k) + "." + std::to_string(l),
                  cores_.at(k, l));
  } else {
    for (int k = 0; k < factors_.K; ++k)
      for (int l = 0; l < factors_.L; ++l) {
        const LowRankFactor& f = factors_.at(k, l);
        if (f.rank() == 0) continue;
        const std::string base = "factor." + std::to_string(k) + "." + std::to_string(l);
        add_f64(base + ".U", f.U);
        add_vec(base + ".d", f.d);
        add_f64(base + ".V", f.V);
      }
  }
  header["arrays"] = arrays;

  // Interleave the integer buffers in declaration order: rebuild the blob
  // list aligned with `arrays`.
  std::vector<std::pair<const void*, std::size_t>> ordered;
  std::size_t f64_at = 0, i64_at = 0;
  for (const auto& a : arrays) {
    if (a.at("kind") == "i64") {
      const auto& buf = int_buffers[i64_at++];
      ordered.emplace_back(buf.data(), sizeof(std::int64_t) * buf.size());
    } else {
      ordered.push_back(blobs[f64_at++]);
    }
  }

  FilePtr f(std::fopen(path.c_str(), "wb"));
  require(f != nullptr, "model save: cannot open '" + path + "'");
  write_bytes(f.get(), kMagic, kMagicLen);
  const std::string htext = header.dump();
  const std::uint64_t hsize = htext.size();
  write_bytes(f.get(), &hsize, sizeof(hsize));
  write_bytes(f.get(), htext.data(), htext.size());
  for (const auto& [ptr, bytes] : ordered) write_bytes(f.get(), ptr, bytes);
  if (std::fflush(f.get()) != 0) throw InvalidInput("model save: flush failed");
}

FittedModel FittedModel::load(const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "model files are little-endian");
  FilePtr f(std::fopen(path.c_str(), "rb"));
  require(f != nullptr, "model load: cannot open '" + path + "'");

  char magic[kMagicLen];
  read_bytes(f.get(), magic, kMagicLen);
  if (std::string_view(magic, kMagicLen) != std::string_view(kMagic, kMagicLen)) {
    if (std::string_view(magic, kMagicLen).starts_with("omic-model/"))
      throw InvalidInput("model file has an incompatible format version");
    throw InvalidInput("not an omic model file");
  }
  std::uint64_t hsize = 0;
  read_bytes(f.get(), &hsize, sizeof(hsize));
  if (hsize > (1ull << 31)) throw InvalidInput("model file corrupt: bad header size");
  std::string htext(hsize, '\0');
  read_bytes(f.get(), htext.data(), hsize);
  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception&) {
    throw InvalidInput("model file corrupt: bad header");
  }
  if (header.value("format", "") != "omic-model/1")
    throw InvalidInput("model file has an incompatible format version");

  FamilyDescriptor desc;
  const json& fam = header.at("family");
  desc.kind = family_kind_from(fam.at("kind"));
  desc.m = fam.at("m");
  desc.n = fam.at("n");

  const int K = header.at("K"), L = header.at("L");
  Matrix lam(K, L);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const json& v = header.at("lambda").at(k).at(l);
      lam(k, l) = v.is_null() ? kInf : v.get<double>();
    }

  FitMeta meta;
  meta.seed = header.at("meta").value("seed", 0ull);
  meta.iterations = header.at("meta").value("iterations", 0);
  meta.objective = header.at("meta").value("objective", 0.0);
  meta.solver = header.at("meta").value("solver", "");

  // Arrays arrive in declaration order.
  std::map<std::string, Matrix> f64s;
  std::map<std::string, std::vector<std::int64_t>> i64s;
  for (const auto& a : header.at("arrays")) {
    const std::string name = a.at("name");
    const Index rows = a.at("rows"), cols = a.at("cols");
    require(rows >= 0 && cols >= 0 && rows * cols <= (Index(1) << 33),
            "model file corrupt: bad array shape");
    if (a.at("kind") == "i64") {
      std::vector<std::int64_t> buf(static_cast<std::size_t>(rows * cols));
      read_bytes(f.get(), buf.data(), sizeof(std::int64_t) * buf.size());
      i64s[name] = std::move(buf);
    } else {
      Matrix m(rows, cols);
      read_bytes(f.get(), m.data(), sizeof(double) * m.size());
      if (!m.allFinite()) throw InvalidInput("model file corrupt: non-finite values");
      f64s[name] = std::move(m);
    }
  }

  auto take_communities = [&](const std::string& side,
                              Index dim) -> std::optional<CommunityAssignment> {
    if (!fam.contains(side)) return std::nullopt;
    auto it = i64s.find(side + ".community_of");
    require(it != i64s.end(), "model file corrupt: missing community table");
    require(static_cast<Index>(it->second.size()) == dim,
            "model file corrupt: community table size");
    std::vector<int> assignment(it->second.begin(), it->second.end());
    CommunityAssignment comm(dim, std::move(assignment));
    const std::uint64_t digest = fam.at(side).at("digest");
    require(comm.digest() == digest, "model file corrupt: community digest mismatch");
    return comm;
  };
  desc.users = take_communities("users", desc.m);
  desc.items = take_communities("items", desc.n);
  if (desc.kind == FamilyKind::kExplicit) {
    desc.explicit_residual_rows = fam.value("row_residual", false);
    desc.explicit_residual_cols = fam.value("col_residual", false);
    const std::size_t nr = fam.at("num_row_blocks"), nc = fam.at("num_col_blocks");
    for (std::size_t b = 0; b < nr; ++b)
      desc.explicit_row_blocks.push_back(f64s.at("explicit.row." + std::to_string(b)));
    for (std::size_t b = 0; b < nc; ++b)
      desc.explicit_col_blocks.push_back(f64s.at("explicit.col." + std::to_string(b)));
  }

  FittedModel model;
  if (header.at("storage") == "dense") {
    DenseComponents cores(K, L);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) {
        auto it = f64s.find("core." + std::to_string(k) + "." + std::to_string(l));
        if (it != f64s.end()) cores.at(k, l) = std::move(it->second);
      }
    model = FittedModel(std::move(desc), std::move(cores), HyperParams(lam), meta);
  } else {
    FactorComponents factors(K, L, desc.m, desc.n);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) {
        const std::string base = "factor." + std::to_string(k) + "." + std::to_string(l);
        auto it = f64s.find(base + ".U");
        if (it == f64s.end()) continue;
        LowRankFactor lr(std::move(it->second), Vector(f64s.at(base + ".d").col(0)),
                         std::move(f64s.at(base + ".V")));
        factors.at(k, l) = std::move(lr);
      }
    model = FittedModel(std::move(desc), std::move(factors), HyperParams(lam), meta);
  }

  if (header.contains("user_ids"))
    model.user_ids = header.at("user_ids").get<std::vector<std::string>>();
  if (header.contains("item_ids"))
    model.item_ids = header.at("item_ids").get<std::vector<std::string>>();
  return model;
}

}  // namespace omic

// Command-line front end: fit / evaluate / explain / synth / bench /
// boundcheck over triplet and community files.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include <omic/experiments.hpp>
#include <omic/model.hpp>
#include <omic/rng.hpp>
#include <omic/scalable.hpp>

using namespace omic;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "omic 1.0";
constexpr double kDenseCellLimit = 4e6;  // auto-switch threshold for m * n

std::uint64_t text_digest(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw InvalidInput("cannot write '" + path + "'");
  out << text;
}

void write_manifest(const std::string& out_path, const std::string& command,
                    const json& config) {
  json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["config"] = config;
  manifest["config_digest"] = text_digest(config.dump());
  write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");
}

FamilyKind parse_family(const std::string& name) {
  if (name == "softimpute") return FamilyKind::kSoftImpute;
  if (name == "bomic") return FamilyKind::kBomic;
  if (name == "omicplus") return FamilyKind::kOmicPlus;
  if (name == "bomicplus") return FamilyKind::kBomicPlus;
  throw InvalidInput("unknown family '" + name + "'");
}

// Canonical component names per family kind, mapping to (k, l) cells.
std::map<std::string, std::pair<int, int>> cell_names(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::kSoftImpute:
      return {{"matrix", {0, 0}}};
    case FamilyKind::kBomic:
      return {{"global", {0, 0}},
              {"itembias", {0, 1}},
              {"userbias", {1, 0}},
              {"residual", {1, 1}}};
    case FamilyKind::kOmicPlus:
      return {{"comm", {0, 0}},
              {"usercommxitem", {0, 1}},
              {"userxitemcomm", {1, 0}},
              {"residual", {1, 1}}};
    case FamilyKind::kBomicPlus:
      return {{"global", {0, 0}},    {"itemcomm", {0, 1}},
              {"itembias", {0, 2}},  {"usercomm", {1, 0}},
              {"comm", {1, 1}},      {"usercommxitem", {1, 2}},
              {"userbias", {2, 0}},  {"userxitemcomm", {2, 1}},
              {"residual", {2, 2}}};
    default:
      throw InvalidInput("explicit families are not constructible from the CLI");
  }
}

struct LambdaSpec {
  HyperParams fixed;           // lambdas outside the axes (inf by default)
  std::vector<GridAxis> axes;  // one per tied group with candidate values
};

// Syntax: "name[=name...]=v1[,v2,...][;...]"; "inf" excludes a component.
LambdaSpec parse_lambda_spec(const std::string& text, FamilyKind kind, int K, int L) {
  const auto names = cell_names(kind);
  LambdaSpec spec;
  spec.fixed = HyperParams::all_infinite(K, L);
  if (text.empty()) return spec;

  std::vector<std::string> groups;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(';', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) groups.push_back(text.substr(start, end - start));
    if (end == text.size()) break;
    start = end + 1;
  }

  for (const std::string& group : groups) {
    std::vector<std::string> tokens;
    start = 0;
    while (start <= group.size()) {
      std::size_t end = group.find('=', start);
      if (end == std::string::npos) end = group.size();
      tokens.push_back(group.substr(start, end - start));
      if (end == group.size()) break;
      start = end + 1;
    }
    require(tokens.size() >= 2, "lambda spec group '" + group + "' needs name=values");

    std::vector<std::pair<int, int>> cells;
    for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
      auto it = names.find(tokens[t]);
      if (it == names.end()) {
        std::string all;
        for (const auto& [n, cell] : names) all += n + " ";
        throw InvalidInput("unknown component name '" + tokens[t] + "' (valid: " + all + ")");
      }
      cells.push_back(it->second);
    }

    std::vector<double> values;
    const std::string& value_text = tokens.back();
    start = 0;
    while (start <= value_text.size()) {
      std::size_t end = value_text.find(',', start);
      if (end == std::string::npos) end = value_text.size();
      const std::string v = value_text.substr(start, end - start);
      if (v == "inf") {
        values.push_back(kInf);
      } else {
        try {
          values.push_back(std::stod(v));
        } catch (...) {
          throw InvalidInput("bad lambda value '" + v + "'");
        }
      }
      if (end == value_text.size()) break;
      start = end + 1;
    }
    require(!values.empty(), "lambda spec group '" + group + "' has no values");

    if (values.size() == 1) {
      for (auto [k, l] : cells) spec.fixed.lam(k, l) = values[0];
    } else {
      for (double v : values)
        require(std::isfinite(v), "grid values must be finite in '" + group + "'");
      spec.axes.push_back({cells, values});
    }
  }
  return spec;
}

// Components not mentioned anywhere get the family's default treatment: the
// global-mean cell is unregularized, bias-type cells share one default grid
// axis, community cross terms another, and the residual gets its own.
void apply_default_lambdas(LambdaSpec& spec, const SparseObservations& train,
                           const BasisFamily& family, FamilyKind kind, int grid_count) {
  std::set<std::pair<int, int>> covered;
  for (int k = 0; k < family.K(); ++k)
    for (int l = 0; l < family.L(); ++l)
      if (spec.fixed.finite(k, l)) covered.insert({k, l});
  for (const auto& axis : spec.axes)
    for (auto cell : axis.cells) covered.insert(cell);

  auto group_of = [&](int k, int l) -> int {
    // 0: unregularized mean cell, 1: bias-type, 2: community cross, 3: residual
    if (kind == FamilyKind::kSoftImpute) return 3;
    if (kind == FamilyKind::kOmicPlus)
      return (k == 1 && l == 1) ? 3 : (k == 0 && l == 0) ? 2 : 1;
    if (k == 0 && l == 0) return 0;
    const int last = family.K() - 1;
    if (k == last && l == last) return 3;
    if (k == 0 || l == 0) return 1;
    return 2;
  };

  std::map<int, std::vector<std::pair<int, int>>> groups;
  for (int k = 0; k < family.K(); ++k)
    for (int l = 0; l < family.L(); ++l) {
      if (covered.count({k, l})) continue;
      if (family.row_side().block(k).width == 0 ||
          family.col_side().block(l).width == 0)
        continue;
      groups[group_of(k, l)].push_back({k, l});
    }

  for (auto& [group, cells] : groups) {
    if (group == 0) {
      for (auto [k, l] : cells) spec.fixed.lam(k, l) = 0.0;
      continue;
    }
    spec.axes.push_back({cells, default_grid(train, family, cells, grid_count)});
  }
}

json report_error(const std::string& message) {
  json err;
  err["error"] = message;
  return err;
}

struct FitArgs {
  std::string data;
  std::string val_data;
  std::string split_spec;
  std::string family = "softimpute";
  std::string users_file;
  std::string items_file;
  std::string lambda_spec;
  int grid_count = 4;
  Index rank = 50;
  double tol = 1e-5;
  int max_iters = 500;
  std::uint64_t seed = 0;
  std::string out = "model.omic";
  std::string report;
  bool force_dense = false;
  bool force_scalable = false;
};

json lambda_to_json(const HyperParams& params) {
  json rows = json::array();
  for (int k = 0; k < params.K(); ++k) {
    json row = json::array();
    for (int l = 0; l < params.L(); ++l)
      if (params.finite(k, l))
        row.push_back(params(k, l));
      else
        row.push_back(nullptr);
    rows.push_back(row);
  }
  return rows;
}

int cmd_fit(const FitArgs& args) {
  require(!(args.force_dense && args.force_scalable),
          "--force-dense and --force-scalable are mutually exclusive");
  const FamilyKind kind = parse_family(args.family);
  const bool needs_communities =
      kind == FamilyKind::kOmicPlus || kind == FamilyKind::kBomicPlus;
  if (needs_communities)
    require(!args.users_file.empty() && !args.items_file.empty(),
            "family '" + args.family +
                "' requires --communities-users and --communities-items");

  const TripletData data = load_triplets(args.data);

  SparseObservations train = data.observations;
  SparseObservations validation(train.rows, train.cols);
  if (!args.val_data.empty()) {
    const TripletData val_raw = load_triplets(args.val_data);
    Index skipped = 0;
    for (const auto& e : val_raw.observations.entries) {
      const auto ui = data.user_index(val_raw.user_ids[e.i]);
      const auto ij = data.item_index(val_raw.item_ids[e.j]);
      if (!ui || !ij) {
        ++skipped;
        continue;
      }
      validation.add(*ui, *ij, e.v);
    }
    if (skipped > 0)
      std::cerr << "note: " << skipped
                << " validation entries outside the training universe\n";
  } else if (!args.split_spec.empty()) {
    double a = 0, b = 0, c = 0;
    if (std::sscanf(args.split_spec.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3)
      throw InvalidInput("--split expects 'train,val,test' ratios");
    SplitResult parts = split(data.observations, a, b, c, args.seed);
    train = std::move(parts.train);
    validation = std::move(parts.validation);
  }

  FamilyDescriptor desc;
  desc.kind = kind;
  desc.m = train.rows;
  desc.n = train.cols;
  if (needs_communities) {
    desc.users = bind_communities(load_communities_raw(args.users_file), data.user_ids);
    desc.items = bind_communities(load_communities_raw(args.items_file), data.item_ids);
  }
  const BasisFamily family = desc.build();

  LambdaSpec spec = parse_lambda_spec(args.lambda_spec, kind, family.K(), family.L());
  apply_default_lambdas(spec, train, family, kind, args.grid_count);

  std::size_t grid_cells = 1;
  for (const auto& axis : spec.axes) grid_cells *= axis.values.size();
  require(grid_cells == 1 || validation.nnz() > 0,
          "a hyperparameter grid needs validation data (--val or --split)");

  const bool dense_path =
      args.force_dense ||
      (!args.force_scalable && static_cast<double>(train.rows) *
                                       static_cast<double>(train.cols) <=
                                   kDenseCellLimit);
  require(!dense_path ||
              static_cast<double>(train.rows) * static_cast<double>(train.cols) <= 64e6,
          "matrix too large for the dense path");

  SolveOptions solver;
  solver.tol = args.tol;
  solver.max_iters = args.max_iters;

  json report;
  report["family"] = to_string(kind);
  report["m"] = train.rows;
  report["n"] = train.cols;
  report["train_entries"] = train.nnz();
  report["validation_entries"] = validation.nnz();
  report["path"] = dense_path ? "dense" : "scalable";

  FittedModel model;
  if (dense_path) {
    const auto path = fit_path(train, family, spec.fixed, spec.axes, solver);
    double best = kInf;
    const PathEntry* chosen = nullptr;
    json candidates = json::array();
    for (const auto& entry : path) {
      double score = std::numeric_limits<double>::quiet_NaN();
      if (validation.nnz() > 0) {
        const Matrix pred = assemble(entry.components, family);
        std::vector<double> t, p;
        for (const auto& e : validation.entries) {
          t.push_back(e.v);
          p.push_back(pred(e.i, e.j));
        }
        score = rmse(t, p);
      }
      json c;
      c["lambda"] = lambda_to_json(entry.params);
      c["objective"] = entry.trace.final_objective;
      c["converged"] = entry.trace.converged;
      if (!std::isnan(score)) c["validation_rmse"] = score;
      candidates.push_back(c);
      if (chosen == nullptr || (!std::isnan(score) && score < best)) {
        if (!std::isnan(score)) best = score;
        chosen = &entry;
      }
    }
    require(chosen != nullptr, "no candidate model was selected");
    report["candidates"] = candidates;
    if (validation.nnz() > 0) report["validation_rmse"] = best;
    report["selected_lambda"] = lambda_to_json(chosen->params);
    report["iterations"] = chosen->trace.iterations;
    report["converged"] = chosen->trace.converged;
    report["objective"] = chosen->trace.final_objective;
    model = FittedModel(desc, chosen->components, chosen->params,
                        FitMeta{args.seed, chosen->trace.iterations,
                                chosen->trace.final_objective, "dense"});
  } else {
    AlsOptions als;
    als.max_rank = args.rank;
    als.seed = args.seed;
    // Product grid over the axes; grids on the scalable path should stay small.
    std::vector<int> idx(spec.axes.size(), 0);
    double best = kInf;
    bool have_best = false;
    json candidates = json::array();
    FactorComponents best_components;
    HyperParams best_params = spec.fixed;
    SolveTrace best_trace;
    std::vector<std::string> best_warnings;
    while (true) {
      HyperParams params = spec.fixed;
      for (std::size_t a = 0; a < spec.axes.size(); ++a)
        for (auto [k, l] : spec.axes[a].cells)
          params.lam(k, l) = spec.axes[a].values[idx[a]];
      const ScalableFitResult result = fit_scalable(train, family, params, als, solver);
      double score = std::numeric_limits<double>::quiet_NaN();
      if (validation.nnz() > 0) {
        const PredictCache cache(result.components.concatenated(train.rows, train.cols));
        std::vector<double> t, p;
        for (const auto& e : validation.entries) {
          t.push_back(e.v);
          p.push_back(cache(e.i, e.j));
        }
        score = rmse(t, p);
      }
      json c;
      c["lambda"] = lambda_to_json(params);
      c["objective"] = result.trace.final_objective;
      c["converged"] = result.trace.converged;
      if (!std::isnan(score)) c["validation_rmse"] = score;
      candidates.push_back(c);
      if (!have_best || (!std::isnan(score) && score < best)) {
        if (!std::isnan(score)) best = score;
        have_best = true;
        best_components = result.components;
        best_params = params;
        best_trace = result.trace;
        best_warnings = result.warnings;
      }
      if (spec.axes.empty()) break;
      std::size_t a = spec.axes.size();
      bool rolled = true;
      while (a > 0) {
        --a;
        if (++idx[a] < static_cast<int>(spec.axes[a].values.size())) {
          rolled = false;
          break;
        }
        idx[a] = 0;
      }
      if (rolled) break;
    }
    report["candidates"] = candidates;
    if (validation.nnz() > 0) report["validation_rmse"] = best;
    report["selected_lambda"] = lambda_to_json(best_params);
    report["iterations"] = best_trace.iterations;
    report["converged"] = best_trace.converged;
    report["objective"] = best_trace.final_objective;
    report["warnings"] = best_warnings;
    model = FittedModel(desc, std::move(best_components), best_params,
                        FitMeta{args.seed, best_trace.iterations,
                                best_trace.final_objective, "scalable"});
  }

  model.user_ids = data.user_ids;
  model.item_ids = data.item_ids;
  model.save(args.out);

  json norms = json::array();
  const Matrix norm_matrix = model.component_norms();
  for (int k = 0; k < family.K(); ++k)
    for (int l = 0; l < family.L(); ++l) {
      json n;
      n["k"] = k;
      n["l"] = l;
      n["label"] = family.cell_label(k, l);
      n["norm"] = norm_matrix(k, l);
      norms.push_back(n);
    }
  report["component_norms"] = norms;
  report["model"] = args.out;

  const std::string report_text = report.dump(2) + "\n";
  if (!args.report.empty()) write_text(args.report, report_text);
  std::cout << report_text;
  return 0;
}

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string clip;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const FittedModel model = FittedModel::load(args.model);
  const TripletData data = load_triplets(args.data);

  double clip_lo = -kInf, clip_hi = kInf;
  if (!args.clip.empty())
    require(std::sscanf(args.clip.c_str(), "%lf:%lf", &clip_lo, &clip_hi) == 2,
            "--clip expects 'lo:hi'");

  std::map<std::string, Index> user_lookup, item_lookup;
  for (std::size_t i = 0; i < model.user_ids.size(); ++i)
    user_lookup[model.user_ids[i]] = static_cast<Index>(i);
  for (std::size_t i = 0; i < model.item_ids.size(); ++i)
    item_lookup[model.item_ids[i]] = static_cast<Index>(i);
  const bool has_ids = !model.user_ids.empty();

  std::vector<double> truth, pred;
  Index skipped = 0;
  for (const auto& e : data.observations.entries) {
    Index i = e.i, j = e.j;
    if (has_ids) {
      const auto ui = user_lookup.find(data.user_ids[e.i]);
      const auto ij = item_lookup.find(data.item_ids[e.j]);
      if (ui == user_lookup.end() || ij == item_lookup.end()) {
        ++skipped;
        continue;
      }
      i = ui->second;
      j = ij->second;
    } else if (e.i >= model.rows() || e.j >= model.cols()) {
      ++skipped;
      continue;
    }
    truth.push_back(e.v);
    pred.push_back(std::clamp(model.predict(i, j), clip_lo, clip_hi));
  }
  require(!truth.empty(), "no test entries fall inside the model's universe");

  json report;
  report["entries"] = truth.size();
  report["skipped"] = skipped;
  report["rmse"] = rmse(truth, pred);
  const double spc =
      truth.size() >= 2 ? spearman(truth, pred) : std::numeric_limits<double>::quiet_NaN();
  if (std::isnan(spc))
    report["spc"] = nullptr;
  else
    report["spc"] = spc;

  const std::string text = report.dump(2) + "\n";
  if (!args.out.empty()) write_text(args.out, text);
  std::cout << text;
  return 0;
}

struct ExplainArgs {
  std::string model;
  std::string user;
  std::string item;
  bool global = false;
  std::string out;
};

int cmd_explain(const ExplainArgs& args) {
  const FittedModel model = FittedModel::load(args.model);
  const BasisFamily& family = model.family();
  json report;

  if (args.global) {
    const Matrix norms = model.component_norms();
    json parts = json::array();
    for (int k = 0; k < family.K(); ++k)
      for (int l = 0; l < family.L(); ++l) {
        json p;
        p["k"] = k;
        p["l"] = l;
        p["label"] = family.cell_label(k, l);
        p["norm"] = norms(k, l);
        parts.push_back(p);
      }
    report["component_norms"] = parts;
  } else {
    require(!args.user.empty() && !args.item.empty(),
            "explain needs --user and --item (or --global)");
    Index i = -1, j = -1;
    if (!model.user_ids.empty()) {
      for (std::size_t t = 0; t < model.user_ids.size(); ++t)
        if (model.user_ids[t] == args.user) i = static_cast<Index>(t);
      for (std::size_t t = 0; t < model.item_ids.size(); ++t)
        if (model.item_ids[t] == args.item) j = static_cast<Index>(t);
      require(i >= 0, "unknown user id '" + args.user + "'");
      require(j >= 0, "unknown item id '" + args.item + "'");
    } else {
      i = std::stoll(args.user);
      j = std::stoll(args.item);
    }
    const Matrix parts = model.explain_entry(i, j);
    json contributions = json::array();
    for (int k = 0; k < family.K(); ++k)
      for (int l = 0; l < family.L(); ++l) {
        json p;
        p["k"] = k;
        p["l"] = l;
        p["label"] = family.cell_label(k, l);
        p["value"] = parts(k, l);
        contributions.push_back(p);
      }
    report["user"] = args.user;
    report["item"] = args.item;
    report["prediction"] = model.predict(i, j);
    report["contributions"] = contributions;
  }

  const std::string text = report.dump(2) + "\n";
  if (!args.out.empty()) write_text(args.out, text);
  std::cout << text;
  return 0;
}

struct SynthArgs {
  double alpha = 0.75;
  int gamma = 1;
  double p_obs = 0.3;
  Index m = 100;
  Index n = 100;
  double c = 100.0;
  std::uint64_t seed = 0;
  std::string out = "synthetic";
};

int cmd_synth(const SynthArgs& args) {
  const SyntheticInstance inst = gen_synthetic(args.alpha, args.gamma, args.p_obs,
                                               args.m, args.n, args.c, args.seed);
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::string observed;
  for (const auto& e : inst.observed.entries)
    observed += std::to_string(e.i) + "\t" + std::to_string(e.j) + "\t" + fmt(e.v) + "\n";
  write_text(args.out + ".observed.tsv", observed);

  std::string truth;
  truth.reserve(static_cast<std::size_t>(inst.full.size()) * 12);
  for (Index i = 0; i < inst.full.rows(); ++i)
    for (Index j = 0; j < inst.full.cols(); ++j) {
      truth += fmt(inst.full(i, j));
      truth += j + 1 < inst.full.cols() ? '\t' : '\n';
    }
  write_text(args.out + ".truth.tsv", truth);

  json meta;
  meta["alpha"] = args.alpha;
  meta["gamma"] = args.gamma;
  meta["p_obs"] = args.p_obs;
  meta["m"] = args.m;
  meta["n"] = args.n;
  meta["c"] = args.c;
  meta["seed"] = args.seed;
  meta["observed_entries"] = inst.observed.nnz();
  meta["top_half_entries"] = inst.top_half_count;
  write_text(args.out + ".meta.json", meta.dump(2) + "\n");
  std::cout << meta.dump(2) << "\n";
  return 0;
}

struct BenchArgs {
  std::vector<double> alphas{0.5, 0.75, 1.0};
  std::vector<int> gammas{1, 4};
  std::vector<double> pobs{0.3};
  int seeds = 10;
  Index m = 100;
  Index n = 100;
  double c = 100.0;
  std::uint64_t seed = 0;
  int threads = 2;
  std::string out = "bench.csv";
};

int cmd_bench(const BenchArgs& args) {
  std::vector<SynthBenchConfig> cells;
  for (double alpha : args.alphas)
    for (int gamma : args.gammas)
      for (double p : args.pobs)
        for (int s = 0; s < args.seeds; ++s) {
          SynthBenchConfig config;
          config.alpha = alpha;
          config.gamma = gamma;
          config.p_obs = p;
          config.m = args.m;
          config.n = args.n;
          config.c = args.c;
          config.seed = args.seed + static_cast<std::uint64_t>(s);
          cells.push_back(config);
        }

  std::vector<std::vector<SynthMethodResult>> results(cells.size());
  std::mutex mutex;
  std::size_t next = 0;
  auto worker = [&] {
    while (true) {
      std::size_t mine;
      {
        std::lock_guard<std::mutex> lock(mutex);
        if (next >= cells.size()) return;
        mine = next++;
      }
      results[mine] = run_synth_bench_cell(cells[mine]);
    }
  };
  std::vector<std::thread> pool;
  const int threads = std::max(1, args.threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string csv = "alpha,gamma,p_obs,seed,method,rmse,spc,mbd,ubd,ibd\n";
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (const auto& row : results[i])
      csv += std::to_string(cells[i].alpha) + "," + std::to_string(cells[i].gamma) +
             "," + std::to_string(cells[i].p_obs) + "," +
             std::to_string(cells[i].seed) + "," + row.method + "," +
             std::to_string(row.rmse) + "," + std::to_string(row.spc) + "," +
             std::to_string(row.mbd) + "," + std::to_string(row.ubd) + "," +
             std::to_string(row.ibd) + "\n";
  write_text(args.out, csv);
  std::cout << "wrote " << cells.size() * 3 << " rows to " << args.out << "\n";
  return 0;
}

struct BoundcheckArgs {
  int configs = 20;
  Index m_max = 200;
  double epsilon = 0.1;
  std::string sampling = "uniform";
  std::uint64_t seed = 0;
  std::string out = "boundcheck.csv";
};

int cmd_boundcheck(const BoundcheckArgs& args) {
  BoundSweepConfig config;
  config.num_configs = args.configs;
  config.m_max = args.m_max;
  config.epsilon = args.epsilon;
  config.seed = args.seed;
  if (args.sampling == "uniform")
    config.mode = SamplingMode::kUniform;
  else if (args.sampling == "checkerboard")
    config.mode = SamplingMode::kCheckerboard;
  else
    throw InvalidInput("--sampling must be 'uniform' or 'checkerboard'");

  const BoundSweepResult result = run_bound_sweep(config);
  std::string csv = "a,r,C,m,n_epsilon,reached,bound\n";
  for (const auto& row : result.configs)
    csv += std::to_string(row.a) + "," + std::to_string(row.r) + "," +
           std::to_string(row.C) + "," + std::to_string(row.m) + "," +
           std::to_string(row.n_epsilon) + "," + std::to_string(row.reached) + "," +
           std::to_string(row.bound) + "\n";
  write_text(args.out, csv);

  json summary;
  summary["configs"] = result.configs.size();
  summary["lambda_comm"] = result.lambda_comm;
  summary["lambda_residual"] = result.lambda_residual;
  summary["spearman"] = result.spearman_value;
  summary["csv"] = args.out;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orthogonal side-information matrix completion toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Train a model from rating triplets");
  fit_cmd->add_option("--data", fit_args.data, "training triplets file")->required();
  fit_cmd->add_option("--val", fit_args.val_data, "validation triplets file");
  fit_cmd->add_option("--split", fit_args.split_spec,
                      "split --data into train,val,test ratios (e.g. 0.85,0.10,0.05)");
  fit_cmd->add_option("--family", fit_args.family,
                      "softimpute | bomic | omicplus | bomicplus");
  fit_cmd->add_option("--communities-users", fit_args.users_file, "user community file");
  fit_cmd->add_option("--communities-items", fit_args.items_file, "item community file");
  fit_cmd->add_option("--lambda,--grid", fit_args.lambda_spec,
                      "per-component thresholds, e.g. "
                      "'userbias=itembias=0.5;residual=2,1,0.5' (multiple values "
                      "form a grid; unmentioned components get defaults)");
  fit_cmd->add_option("--grid-count", fit_args.grid_count, "values per default grid axis");
  fit_cmd->add_option("--rank", fit_args.rank, "rank cap for the scalable path");
  fit_cmd->add_option("--tol", fit_args.tol, "relative-change convergence tolerance");
  fit_cmd->add_option("--max-iters", fit_args.max_iters, "iteration cap");
  fit_cmd->add_option("--seed", fit_args.seed, "random seed");
  fit_cmd->add_option("--out", fit_args.out, "output model file");
  fit_cmd->add_option("--report", fit_args.report, "JSON fit report path");
  fit_cmd->add_flag("--force-dense", fit_args.force_dense, "use the dense reference path");
  fit_cmd->add_flag("--force-scalable", fit_args.force_scalable, "use the scalable path");

  EvaluateArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a model on test triplets");
  eval_cmd->add_option("--model", eval_args.model, "model file")->required();
  eval_cmd->add_option("--data", eval_args.data, "test triplets file")->required();
  eval_cmd->add_option("--out", eval_args.out, "JSON report path");
  eval_cmd->add_option("--clip", eval_args.clip, "clip predictions to 'lo:hi'");

  ExplainArgs explain_args;
  CLI::App* explain_cmd =
      app.add_subcommand("explain", "Per-component contributions of a prediction");
  explain_cmd->add_option("--model", explain_args.model, "model file")->required();
  explain_cmd->add_option("--user", explain_args.user, "user id");
  explain_cmd->add_option("--item", explain_args.item, "item id");
  explain_cmd->add_flag("--global", explain_args.global, "global component norms");
  explain_cmd->add_option("--out", explain_args.out, "JSON report path");

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic instance");
  synth_cmd->add_option("--alpha", synth_args.alpha, "bias-vs-specific mixture weight");
  synth_cmd->add_option("--gamma", synth_args.gamma, "sampling skew (1 = uniform)");
  synth_cmd->add_option("--p-obs", synth_args.p_obs, "observed fraction");
  synth_cmd->add_option("--m", synth_args.m, "rows");
  synth_cmd->add_option("--n", synth_args.n, "columns");
  synth_cmd->add_option("--c", synth_args.c, "scale constant");
  synth_cmd->add_option("--seed", synth_args.seed, "random seed");
  synth_cmd->add_option("--out", synth_args.out, "output file prefix");

  BenchArgs bench_args;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Method comparison sweep on synthetic instances");
  bench_cmd->add_option("--alphas", bench_args.alphas, "alpha values");
  bench_cmd->add_option("--gammas", bench_args.gammas, "gamma values");
  bench_cmd->add_option("--pobs", bench_args.pobs, "observed fractions");
  bench_cmd->add_option("--seeds", bench_args.seeds, "seeds per cell");
  bench_cmd->add_option("--m", bench_args.m, "rows");
  bench_cmd->add_option("--n", bench_args.n, "columns");
  bench_cmd->add_option("--c", bench_args.c, "scale constant");
  bench_cmd->add_option("--seed", bench_args.seed, "base seed");
  bench_cmd->add_option("--threads", bench_args.threads, "worker threads");
  bench_cmd->add_option("--out", bench_args.out, "output CSV path");

  BoundcheckArgs bound_args;
  CLI::App* bound_cmd =
      app.add_subcommand("boundcheck", "Sample-complexity sweep vs the analytic bound");
  bound_cmd->add_option("--configs", bound_args.configs, "number of random configurations");
  bound_cmd->add_option("--m-max", bound_args.m_max, "largest matrix dimension");
  bound_cmd->add_option("--epsilon", bound_args.epsilon, "target held-out RMSE");
  bound_cmd->add_option("--sampling", bound_args.sampling, "uniform | checkerboard");
  bound_cmd->add_option("--seed", bound_args.seed, "random seed");
  bound_cmd->add_option("--out", bound_args.out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    json config;
    config["argv"] = json::array();
    for (int i = 1; i < argc; ++i) config["argv"].push_back(argv[i]);
    if (fit_cmd->parsed()) {
      write_manifest(fit_args.out, "fit", config);
      return cmd_fit(fit_args);
    }
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (explain_cmd->parsed()) return cmd_explain(explain_args);
    if (synth_cmd->parsed()) {
      write_manifest(synth_args.out, "synth", config);
      return cmd_synth(synth_args);
    }
    if (bench_cmd->parsed()) {
      write_manifest(bench_args.out, "bench", config);
      return cmd_bench(bench_args);
    }
    if (bound_cmd->parsed()) {
      write_manifest(bound_args.out, "boundcheck", config);
      return cmd_boundcheck(bound_args);
    }
  } catch (const std::exception& e) {
    std::cerr << report_error(e.what()).dump() << "\n";
    return 1;
  }
  return 0;
}

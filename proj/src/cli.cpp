#include "autogmm/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "CLI11.hpp"

namespace autogmm::cli {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (item.empty()) throw InputError("empty item in list '" + text + "'");
    items.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return items;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& text, F parse_one) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_one(item));
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F name) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ',';
    out += name(item);
  }
  return out;
}

// Text-valued flags that are converted after CLI11 has run.
struct RawFlags {
  std::string affinities, linkages, constraints, criterion, kind, variants;
};

void add_search_flags(CLI::App& cmd, Options& o, RawFlags& raw) {
  SearchConfig& s = o.hgmm.search;
  cmd.add_option("--kmin", s.kmin, "smallest number of components")->capture_default_str();
  cmd.add_option("--kmax", s.kmax, "largest number of components")->capture_default_str();
  cmd.add_option("--affinities", raw.affinities, "comma list of l2,l1,cosine,none")
      ->capture_default_str();
  cmd.add_option("--linkages", raw.linkages, "comma list of ward,complete,average,single")
      ->capture_default_str();
  cmd.add_option("--constraints", raw.constraints, "comma list of spherical,diag,tied,full")
      ->capture_default_str();
  cmd.add_option("--criterion", raw.criterion, "bic or aic")->capture_default_str();
  cmd.add_option("--subset-cap", s.subset_cap, "rows used for agglomeration")
      ->capture_default_str();
  cmd.add_option("--kmeans-reps", s.kmeans_reps, "k-means restarts")->capture_default_str();
  cmd.add_option("--max-iter", s.em.max_iter, "EM iteration cap")->capture_default_str();
  cmd.add_option("--tol", s.em.tol, "EM convergence tolerance")->capture_default_str();
  cmd.add_option("--seed", s.seed, "master seed")->capture_default_str();
  cmd.add_option("--threads", s.threads, "worker threads, 0 for all cores")
      ->capture_default_str();
  cmd.add_option("--out-dir", o.out_dir, "directory for output files")->capture_default_str();
  cmd.add_flag("--header", o.header, "first input row is a header");
}

void apply_raw(Options& o, const RawFlags& raw) {
  SearchConfig& s = o.hgmm.search;
  s.affinities = parse_list<Affinity>(raw.affinities, [](const std::string& v) { return parse_affinity(v); });
  s.linkages = parse_list<Linkage>(raw.linkages, [](const std::string& v) { return parse_linkage(v); });
  s.constraints = parse_list<CovarianceConstraint>(
      raw.constraints, [](const std::string& v) { return parse_constraint(v); });
  s.criterion = parse_criterion(raw.criterion);
  o.kind = parse_synthetic_kind(raw.kind);
  o.variants = split_list(raw.variants);
}

std::string format_value(double v) {
  std::string s = format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string init_name(const InitMethod& m) { return m.is_kmeans() ? "kmeans" : m.name(); }

std::string summary(const CandidateResult& c, Criterion criterion) {
  return "k=" + std::to_string(c.k) + " constraint=" + std::string(to_string(c.constraint)) +
         " init=" + init_name(c.method) + " " + std::string(to_string(criterion)) + "=" +
         format_value(*c.criterion_value) + " reg_covar=" + format_value(c.reg_covar);
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  const DataMatrix data = read_matrix(o.input, o.header);
  const SearchConfig& s = o.hgmm.search;
  const SearchResult result = autogmm_search(data, s);
  ensure_dir(o.out_dir);
  write_labels(o.out_dir / "labels.csv", result.best.fit->labels);
  write_json(o.out_dir / "model.json",
             candidate_to_json(result.best, static_cast<long>(data.rows()), {s.criterion, s.seed}));
  write_text(o.out_dir / "grid.csv", grid_csv(result.grid));
  const auto failed = std::count_if(result.grid.begin(), result.grid.end(),
                                    [](const CandidateResult& c) { return !c.converged(); });
  if (failed > 0) {
    err << failed << " of " << result.grid.size() << " candidates failed to converge\n";
  }
  out << summary(result.best, s.criterion) << '\n';
  return kExitOk;
}

int cmd_hfit(const Options& o, std::ostream& out, std::ostream& err) {
  const DataMatrix data = read_matrix(o.input, o.header);
  const DendrogramNode root = hgmm_fit(data, o.hgmm);
  ensure_dir(o.out_dir);
  const SearchConfig& s = o.hgmm.search;
  write_json(o.out_dir / "dendrogram.json", dendrogram_to_json(root, {s.criterion, s.seed}));
  const int depth = tree_depth(root);
  for (int d = 1; d <= depth; ++d) {
    write_labels(o.out_dir / ("cut_depth_" + std::to_string(d) + ".csv"), cut_at_depth(root, d));
  }
  if (root.leaf_reason == LeafReason::search_failure) {
    err << "error: search failed at the root: " << root.failure << '\n';
    return kExitSearch;
  }
  out << "leaves=" << leaves(root).size() << " depth=" << depth;
  if (root.selection) out << " root: " << summary(*root.selection, s.criterion);
  out << '\n';
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw InputError("synth needs --out");
  const SyntheticData gen = generate({o.kind, o.hgmm.search.seed, o.count});
  write_matrix(o.out, gen.data);
  std::filesystem::path stem = o.out;
  stem.replace_extension();
  const std::string base = stem.string();
  write_labels(base + ".truth.csv", gen.truth);
  if (o.kind == SyntheticKind::hierarchy) {
    write_labels(base + ".truth2.csv", gen.truth_coarse);
    write_labels(base + ".truth4.csv", gen.truth_middle);
    write_labels(base + ".truth8.csv", gen.truth);
  }
  out << "wrote " << gen.data.rows() << "x" << gen.data.cols() << " " << to_string(o.kind)
      << " to " << o.out.string() << '\n';
  return kExitOk;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.truth.empty()) throw InputError("bench needs --truth");
  const DataMatrix data = read_matrix(o.input, o.header);
  const Labels truth = read_labels(o.truth);
  const auto configs = bench_configs(o.hgmm.search, o.variants);
  const BenchmarkReport report =
      subsample_benchmark(data, truth, configs, o.reps, o.frac, o.hgmm.search.seed,
                          o.exact ? WilcoxonMode::exact : WilcoxonMode::normal);
  ensure_dir(o.out_dir);
  write_text(o.out_dir / "bench.csv", benchmark_csv(report, false));
  write_json(o.out_dir / "bench_ari.json", benchmark_summary_json(report, "ari"));
  // Timings vary between runs, so they live in their own files.
  write_text(o.out_dir / "bench_timing.csv", benchmark_csv(report, true));
  write_json(o.out_dir / "bench_timing.json", benchmark_summary_json(report, "seconds"));

  for (const auto& rec : report.records) {
    if (rec.failed) err << "rep " << rec.rep << " " << rec.method << " failed: " << rec.failure << '\n';
  }
  for (std::size_t m = 0; m < configs.size(); ++m) {
    std::vector<double> aris;
    for (std::size_t r = 0; r < report.subsets.size(); ++r) {
      const auto& rec = report.records[r * configs.size() + m];
      if (!rec.failed) aris.push_back(rec.ari);
    }
    out << (m ? " " : "") << configs[m].name << ":median_ari=";
    if (aris.empty()) {
      out << "nan";
    } else {
      std::sort(aris.begin(), aris.end());
      const std::size_t h = aris.size() / 2;
      const double med = aris.size() % 2 ? aris[h] : 0.5 * (aris[h - 1] + aris[h]);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", med);
      out << buf;
    }
  }
  out << '\n';
  return kExitOk;
}

int cmd_ari(const Options& o, std::ostream& out) {
  if (o.second.empty()) throw InputError("ari needs two label files");
  const double v = adjusted_rand_index(read_labels(o.input), read_labels(o.second));
  out << format_value(v) << '\n';
  return kExitOk;
}

}  // namespace

std::vector<NamedConfig> bench_configs(const SearchConfig& base,
                                       const std::vector<std::string>& variants) {
  std::vector<NamedConfig> out;
  for (const auto& name : variants) {
    if (std::any_of(out.begin(), out.end(), [&](const NamedConfig& c) { return c.name == name; })) {
      throw InputError("duplicate benchmark variant '" + name + "'");
    }
    SearchConfig cfg = base;
    if (name != "all") {
      const auto& all = all_init_methods();
      const auto it = std::find_if(all.begin(), all.end(),
                                   [&](const InitMethod& m) { return m.name() == name; });
      if (it == all.end()) throw InputError("unknown benchmark variant '" + name + "'");
      cfg.affinities = {it->affinity};
      cfg.linkages = it->linkage ? std::vector<Linkage>{*it->linkage} : base.linkages;
    }
    cfg.validate();
    out.push_back({name, cfg});
  }
  return out;
}

Options parse(const std::vector<std::string>& args) {
  Options o;
  const SearchConfig defaults;
  RawFlags raw;
  raw.affinities = join(defaults.affinities, [](Affinity a) { return std::string(to_string(a)); });
  raw.linkages = join(defaults.linkages, [](Linkage l) { return std::string(to_string(l)); });
  raw.constraints = join(defaults.constraints,
                         [](CovarianceConstraint c) { return std::string(to_string(c)); });
  raw.criterion = std::string(to_string(defaults.criterion));
  raw.kind = std::string(to_string(o.kind));
  raw.variants = join(o.variants, [](const std::string& v) { return v; });

  CLI::App app{"Automatic Gaussian mixture model search", "autogmm"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "search the model grid for one dataset");
  fit->add_option("data", o.input, "numeric CSV")->required();
  add_search_flags(*fit, o, raw);

  auto* hfit = app.add_subcommand("hfit", "recursive hierarchical fit");
  hfit->add_option("data", o.input, "numeric CSV")->required();
  add_search_flags(*hfit, o, raw);
  hfit->add_option("--max-components", o.hgmm.max_components, "components per split")
      ->capture_default_str();
  hfit->add_option("--min-split", o.hgmm.min_split, "smallest node that is split, 0 for 2*max-components")
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset and its truth labels");
  synth->add_option("--kind", raw.kind, "three_component, double_cigar or hierarchy")
      ->capture_default_str();
  synth->add_option("--seed", o.hgmm.search.seed, "generator seed")->capture_default_str();
  synth->add_option("--count", o.count, "total (three_component) or per-component size");
  synth->add_option("--out", o.out, "data CSV path")->required();

  auto* bench = app.add_subcommand("bench", "subsample benchmark of search variants");
  bench->add_option("data", o.input, "numeric CSV")->required();
  bench->add_option("--truth", o.truth, "true labels, one per line")->required();
  add_search_flags(*bench, o, raw);
  bench->add_option("--variants", raw.variants, "comma list of 'all' or single method names")
      ->capture_default_str();
  bench->add_option("--reps", o.reps, "number of subsamples")->capture_default_str();
  bench->add_option("--frac", o.frac, "subsample fraction")->capture_default_str();
  bench->add_flag("--exact", o.exact, "exact signed-rank p-values");

  auto* ari = app.add_subcommand("ari", "adjusted Rand index of two label files");
  ari->add_option("a", o.input, "labels")->required();
  ari->add_option("b", o.second, "labels")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    o.help = true;
    o.usage = app.help();
    return o;
  } catch (const CLI::ParseError& e) {
    throw InputError(e.what());
  }
  o.subcommand = app.get_subcommands().front()->get_name();
  apply_raw(o, raw);
  if (o.subcommand == "hfit") {
    o.hgmm.validate();
  } else if (o.subcommand == "fit" || o.subcommand == "bench") {
    o.hgmm.search.validate();
  }
  return o;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const Options o = parse(args);
    if (o.help) {
      out << o.usage;
      return kExitOk;
    }
    if (o.subcommand == "fit") return cmd_fit(o, out, err);
    if (o.subcommand == "hfit") return cmd_hfit(o, out, err);
    if (o.subcommand == "synth") return cmd_synth(o, out);
    if (o.subcommand == "bench") return cmd_bench(o, out, err);
    return cmd_ari(o, out);
  } catch (const SearchError& e) {
    err << "error: " << e.what() << '\n';
    return kExitSearch;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace autogmm::cli

#include "manifold_id/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "manifold_id/reports.hpp"
#include "manifold_id/rng.hpp"

namespace manifold_id {

namespace {

const std::vector<Index> kDefaultKList = {5, 10, 20, 50, 100, 200};

std::vector<Estimator> chosen(const RunConfig& config, std::vector<Estimator> fallback) {
  return config.estimators.empty() ? fallback : config.estimators;
}

void note(const RunConfig& config, const std::string& message) {
  if (config.verbose) std::cerr << "[" << config.command << "] " << message << std::endl;
}

std::string out_path(const RunConfig& config, const std::string& name) {
  return (std::filesystem::path(config.out_dir) / name).string();
}

void ensure_out_dir(const RunConfig& config) {
  if (config.out_dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec || !std::filesystem::is_directory(config.out_dir)) {
    throw IoError("cannot create output directory '" + config.out_dir + "'");
  }
}

RowMatrixXd select_rows(const RowMatrixXd& data, const std::vector<Index>& rows) {
  RowMatrixXd out(static_cast<Index>(rows.size()), data.cols());
  for (Index r = 0; r < out.rows(); ++r) out.row(r) = data.row(rows[r]);
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Index table_k(const std::vector<Estimator>& estimators, Index k) {
  bool any = false;
  for (Estimator e : estimators) any = any || uses_neighbors(e);
  return any ? std::max<Index>(k, 2) : 0;
}

std::string band_label(int b) {
  const int lo = -90 + 18 * b;
  return "lat[" + std::to_string(lo) + "," + std::to_string(lo + 18) + (b == kLatitudeBands - 1 ? "]" : ")");
}

std::vector<GeoPoint> require_coords(const Dataset& data) {
  if (!data.coords) {
    throw ConfigError("this command needs coordinates per row; EMB1 files carry none (use a lon,lat CSV)");
  }
  return *data.coords;
}

}  // namespace

void RunConfig::validate() const {
  if (embeddings_path && !std::filesystem::exists(*embeddings_path)) {
    throw IoError("embedding file '" + *embeddings_path + "' does not exist");
  }
  if (mask_path && !std::filesystem::exists(*mask_path)) throw IoError("mask file '" + *mask_path + "' does not exist");
  if (!embeddings_path) {
    if (n < 2) throw ConfigError("n must be >= 2");
    encoder.validate();
  }
  if (k < 0) throw ConfigError("k must be >= 0");
  if (!embeddings_path && k > 0 && k >= n) {
    throw ConfigError("k = " + std::to_string(k) + " must be below n = " + std::to_string(n));
  }
  if (subsamples < 0) throw ConfigError("subsample count must be >= 0");
  if (subsamples > 0 && subsample_size < 3) throw ConfigError("subsample size must be >= 3");
  if (validate_seeds < 1) throw ConfigError("validation needs at least one seed");
  if (!(fishers_C >= 1.0)) throw ConfigError("FisherS eigenvalue ratio must be >= 1");
  for (Index kk : k_list) {
    if (kk < 2) throw ConfigError("k-sweep values must be >= 2");
  }
}

Dataset prepare_dataset(const RunConfig& config) {
  config.validate();
  Dataset raw;
  if (config.embeddings_path) {
    note(config, "reading " + *config.embeddings_path);
    LocatedEmbeddings located = read_embeddings_file(*config.embeddings_path);
    raw.emb = std::move(located.emb);
    raw.coords = std::move(located.coords);
    raw.scheme = "file";
  } else {
    std::optional<LandMask> mask;
    if (config.mask_path) mask = read_mask_file(*config.mask_path);
    if (config.scheme == Scheme::Land && !mask) throw ConfigError("--scheme land needs --mask");
    const GeoPointSet points =
        sample_points(config.scheme, static_cast<std::size_t>(config.n), config.seed, mask ? &*mask : nullptr);
    EncoderSpec spec = config.encoder;
    spec.seed = config.seed;
    note(config, "encoding " + std::to_string(points.size()) + " points with " + spec.describe());
    raw.emb = encode(points, spec);
    raw.coords = points.points;
    raw.scheme = std::string(scheme_name(points.scheme));
    raw.fallback_warning = points.fallback_warning;
  }
  validate_embedding(raw.emb);

  DedupResult unique = dedup_rows(raw.emb);
  Dataset out;
  out.emb = std::move(unique.emb);
  out.scheme = raw.scheme;
  out.fallback_warning = raw.fallback_warning;
  if (raw.coords) {
    std::vector<GeoPoint> coords;
    coords.reserve(unique.kept.size());
    for (Index r : unique.kept) coords.push_back((*raw.coords)[r]);
    out.coords = std::move(coords);
  }
  if (out.emb.rows() < raw.emb.rows()) {
    note(config, "dropped " + std::to_string(raw.emb.rows() - out.emb.rows()) + " duplicate rows");
  }
  return out;
}

IdReport estimate_global(const RowMatrixXd& data, Estimator estimator, Index k, const RunConfig& config,
                         const NeighborTable* table, SeparabilityProfile* profile) {
  IdReport report;
  report.estimator = estimator;
  report.n = data.rows();
  report.seed = config.seed;
  if (uses_neighbors(estimator)) {
    const Index need = std::max<Index>(k, 2);
    if (need >= data.rows()) {
      throw ConfigError("k = " + std::to_string(need) + " must be below n = " + std::to_string(data.rows()));
    }
    NeighborTable own;
    if (table == nullptr || table->k < need) {
      own = knn_exact(data, need);
      table = &own;
    }
    report.k = estimator == Estimator::TwoNn ? 2 : k;
    if (estimator == Estimator::TwoNn) {
      report.global_value = twonn_global(*table).dimension;
    } else {
      const LocalIdMap map = local_ids(data, *table, estimator, k);
      report.global_value = aggregate_global(map);
      report.degenerate = map.size() - map.defined_count();
    }
  } else if (estimator == Estimator::CorrInt) {
    CorrIntOptions options;
    options.seed = CounterRng(config.seed, "corrint").key();
    report.global_value = corrint_global(data, options);
  } else {
    FisherSResult fs = fishers_global(data, config.fishers_C, config.alpha_grid);
    report.global_value = fs.dimension;
    if (profile != nullptr) *profile = std::move(fs.profile);
  }
  return report;
}

std::vector<IdReport> estimate_globals(const RowMatrixXd& data, const std::vector<Estimator>& estimators, Index k,
                                       const RunConfig& config, SeparabilityProfile* profile) {
  std::optional<NeighborTable> table;
  const Index tk = table_k(estimators, k);
  if (tk > 0) {
    if (tk >= data.rows()) {
      throw ConfigError("k = " + std::to_string(tk) + " must be below n = " + std::to_string(data.rows()));
    }
    note(config, "kNN k=" + std::to_string(tk) + " on " + std::to_string(data.rows()) + " x " +
                     std::to_string(data.cols()));
    table = knn_exact(data, tk);
  }
  std::vector<IdReport> out;
  for (Estimator e : estimators) {
    note(config, std::string(estimator_name(e)));
    out.push_back(estimate_global(data, e, k, config, table ? &*table : nullptr, profile));
  }
  return out;
}

std::vector<std::vector<Index>> subsample_rows(Index n, Index runs, Index size, std::uint64_t seed) {
  if (runs < 1) return {};
  size = std::min(size, n);
  const CounterRng rng(seed, "subsample");
  auto shuffle_prefix = [n](const CounterRng& r, Index count) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    for (Index i = 0; i < count && i < n - 1; ++i) {
      const Index j = i + static_cast<Index>(r.bits(static_cast<std::uint64_t>(i)) % static_cast<std::uint64_t>(n - i));
      std::swap(order[i], order[j]);
    }
    return order;
  };
  std::vector<std::vector<Index>> out;
  if (runs * size <= n) {
    const auto order = shuffle_prefix(rng.substream("disjoint"), runs * size);
    for (Index r = 0; r < runs; ++r) {
      std::vector<Index> rows(order.begin() + r * size, order.begin() + (r + 1) * size);
      std::sort(rows.begin(), rows.end());
      out.push_back(std::move(rows));
    }
  } else {
    for (Index r = 0; r < runs; ++r) {
      const auto order = shuffle_prefix(rng.substream("run" + std::to_string(r)), size);
      std::vector<Index> rows(order.begin(), order.begin() + size);
      std::sort(rows.begin(), rows.end());
      out.push_back(std::move(rows));
    }
  }
  return out;
}

GlobalIdResult cmd_global_id(const RunConfig& config) {
  const auto estimators = chosen(config, all_estimators());
  const Dataset data = prepare_dataset(config);
  const Index k = config.global_k();
  GlobalIdResult result;
  SeparabilityProfile profile;
  result.reports = estimate_globals(data.emb.data, estimators, k, config, &profile);

  for (IdReport& r : result.reports) {
    r.scheme = data.scheme;
    if (data.fallback_warning) r.note = "scheme fell back to uniform sampling";
  }
  if (std::find(estimators.begin(), estimators.end(), Estimator::FisherS) != estimators.end()) {
    result.fishers_profile = std::move(profile);
  }

  if (config.subsamples > 0) {
    const auto runs = subsample_rows(data.emb.rows(), config.subsamples, config.subsample_size, config.seed);
    std::vector<std::vector<double>> values(estimators.size());
    for (std::size_t r = 0; r < runs.size(); ++r) {
      note(config, "subsample " + std::to_string(r + 1) + "/" + std::to_string(runs.size()));
      const RowMatrixXd sub = select_rows(data.emb.data, runs[r]);
      const auto reports = estimate_globals(sub, estimators, k, config);
      for (std::size_t e = 0; e < estimators.size(); ++e) values[e].push_back(reports[e].global_value);
    }
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      result.reports[e].subsample_mean = mean_of(values[e]);
      result.reports[e].subsample_std = sample_std(values[e]);
      result.reports[e].subsamples = static_cast<Index>(runs.size());
    }
  }

  if (!config.out_dir.empty()) {
    ensure_out_dir(config);
    write_text_file(out_path(config, "global_id.csv"), reports_to_csv(result.reports));
    if (result.fishers_profile) write_text_file(out_path(config, "fishers_profile.csv"), profile_to_csv(*result.fishers_profile));
  }
  return result;
}

std::vector<LocalIdMap> cmd_local_id(const RunConfig& config) {
  const auto estimators = chosen(config, {Estimator::Mle});
  for (Estimator e : estimators) {
    if (!has_local_values(e)) {
      throw ConfigError("estimator '" + std::string(estimator_name(e)) + "' has no local form");
    }
  }
  const Dataset data = prepare_dataset(config);
  const std::vector<GeoPoint> coords = require_coords(data);
  const Index k = config.local_k();

  std::optional<NeighborTable> table;
  const Index tk = table_k(estimators, k);
  if (tk > 0) {
    if (tk >= data.emb.rows()) {
      throw ConfigError("k = " + std::to_string(tk) + " must be below n = " + std::to_string(data.emb.rows()));
    }
    note(config, "kNN k=" + std::to_string(tk));
    table = knn_exact(data.emb.data, tk);
  }

  std::vector<LocalIdMap> maps;
  for (Estimator e : estimators) {
    note(config, std::string(estimator_name(e)));
    LocalIdMap map = e == Estimator::FisherS ? fishers_local(data.emb.data, config.fishers_C, config.alpha_grid)
                                             : local_ids(data.emb.data, *table, e, k);
    map.coords = coords;
    maps.push_back(std::move(map));
  }

  if (!config.out_dir.empty()) {
    ensure_out_dir(config);
    for (const LocalIdMap& map : maps) {
      const std::string stem = "local_" + std::string(estimator_name(map.estimator));
      write_text_file(out_path(config, stem + ".csv"), local_map_to_csv(map));
      write_text_file(out_path(config, stem + ".geojson"), local_map_to_geojson(map));
    }
  }
  return maps;
}

int latitude_band(double lat) {
  const int b = static_cast<int>(std::floor((lat + 90.0) / 18.0));
  return std::clamp(b, 0, kLatitudeBands - 1);
}

std::vector<IdReport> cmd_bands(const RunConfig& config) {
  const auto estimators = chosen(config, all_estimators());
  const Dataset data = prepare_dataset(config);
  const std::vector<GeoPoint> coords = require_coords(data);
  const Index k = config.global_k();

  std::vector<std::vector<Index>> members(kLatitudeBands);
  for (Index i = 0; i < static_cast<Index>(coords.size()); ++i) members[latitude_band(coords[i].lat)].push_back(i);

  std::vector<IdReport> out;
  for (int b = 0; b < kLatitudeBands; ++b) {
    const auto count = static_cast<Index>(members[b].size());
    note(config, band_label(b) + ": " + std::to_string(count) + " points");
    std::vector<IdReport> reports;
    if (count < k + 1) {
      for (Estimator e : estimators) {
        IdReport r;
        r.estimator = e;
        r.k = uses_neighbors(e) ? k : 0;
        r.n = count;
        r.note = "flagged: fewer than k+1 points";
        reports.push_back(r);
      }
    } else {
      const RowMatrixXd sub = select_rows(data.emb.data, members[b]);
      std::optional<NeighborTable> table;
      if (table_k(estimators, k) > 0) table = knn_exact(sub, std::max<Index>(k, 2));
      for (Estimator e : estimators) {
        try {
          reports.push_back(estimate_global(sub, e, k, config, table ? &*table : nullptr));
        } catch (const DegenerateDataError& err) {
          IdReport r;
          r.estimator = e;
          r.n = count;
          r.note = std::string("flagged: ") + err.what();
          reports.push_back(r);
        }
      }
    }
    for (IdReport& r : reports) {
      r.label = band_label(b);
      r.scheme = data.scheme;
      r.seed = config.seed;
      out.push_back(std::move(r));
    }
  }

  if (!config.out_dir.empty()) {
    ensure_out_dir(config);
    write_text_file(out_path(config, "bands.csv"), reports_to_csv(out));
  }
  return out;
}

std::vector<IdReport> cmd_ksweep(const RunConfig& config) {
  auto estimators = chosen(config, {Estimator::Mle, Estimator::Mom, Estimator::Tle, Estimator::TwoNn, Estimator::Ess});
  std::erase_if(estimators, [](Estimator e) { return !uses_neighbors(e); });
  if (estimators.empty()) throw ConfigError("k-sweep needs at least one neighbor-based estimator");
  const std::vector<Index> k_list = config.k_list.empty() ? kDefaultKList : config.k_list;
  const Index k_max = *std::max_element(k_list.begin(), k_list.end());
  if (!config.embeddings_path && k_max >= config.n) {
    throw ConfigError("max k = " + std::to_string(k_max) + " must be below n = " + std::to_string(config.n));
  }
  const Dataset data = prepare_dataset(config);
  if (k_max >= data.emb.rows()) {
    throw ConfigError("max k = " + std::to_string(k_max) + " must be below n = " + std::to_string(data.emb.rows()));
  }
  note(config, "kNN k=" + std::to_string(k_max));
  const NeighborTable table = knn_exact(data.emb.data, std::max<Index>(k_max, 2));

  std::vector<IdReport> out;
  for (Estimator e : estimators) {
    for (IdReport& r : ksweep(data.emb.data, table, e, k_list)) {
      r.scheme = data.scheme;
      r.seed = config.seed;
      out.push_back(std::move(r));
    }
  }
  if (!config.out_dir.empty()) {
    ensure_out_dir(config);
    write_text_file(out_path(config, "ksweep.csv"), reports_to_csv(out));
  }
  return out;
}

ValidationResult cmd_validate(const RunConfig& config) {
  config.validate();
  const std::vector<Estimator> estimators = {Estimator::Mle, Estimator::Mom, Estimator::Tle, Estimator::FisherS};
  const Index k = config.global_k();

  struct Stage {
    std::string name;
    EncoderSpec spec;
  };
  std::vector<Stage> stages;
  {
    EncoderSpec raw;
    raw.kind = EncoderKind::Raw;
    EncoderSpec sh;
    sh.kind = EncoderKind::SphericalHarmonics;
    sh.L = 40;
    EncoderSpec linear = sh;
    linear.head = HeadKind::Linear;
    linear.head_width = config.encoder.head_width;
    linear.head_depth = config.encoder.head_depth;
    EncoderSpec siren = linear;
    siren.head = HeadKind::Siren;
    siren.omega0 = config.encoder.omega0;
    stages = {{"raw", raw}, {"sh", sh}, {"sh+linear", linear}, {"sh+siren", siren}};
  }

  ValidationResult result;
  for (const Stage& stage : stages) {
    std::vector<std::vector<double>> values(estimators.size());
    for (Index s = 0; s < config.validate_seeds; ++s) {
      RunConfig run = config;
      run.command = config.command + " " + stage.name + " seed " + std::to_string(s);
      run.embeddings_path.reset();
      run.encoder = stage.spec;
      run.seed = config.seed + static_cast<std::uint64_t>(s);
      const Dataset data = prepare_dataset(run);
      const auto reports = estimate_globals(data.emb.data, estimators, k, run);
      for (std::size_t e = 0; e < estimators.size(); ++e) values[e].push_back(reports[e].global_value);
    }
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      ValidationRow row;
      row.stage = stage.name;
      row.estimator = estimators[e];
      row.values = values[e];
      row.mean = mean_of(values[e]);
      row.std = sample_std(values[e]);
      result.rows.push_back(std::move(row));
    }
  }

  const std::vector<std::pair<Estimator, double>> mae_limits = {
      {Estimator::Mle, 0.30}, {Estimator::Mom, 0.30}, {Estimator::Tle, 0.40}, {Estimator::FisherS, 0.08}};
  char buf[160];
  for (const auto& [e, limit] : mae_limits) {
    double sum = 0.0;
    int count = 0;
    for (const ValidationRow& row : result.rows) {
      if (row.estimator != e) continue;
      sum += std::abs(row.mean - 2.0);
      ++count;
      if (e == Estimator::FisherS && !(row.mean >= 1.95 && row.mean <= 2.15)) {
        std::snprintf(buf, sizeof buf, "fishers mean on stage %s is %.4f, outside [1.95, 2.15]", row.stage.c_str(),
                      row.mean);
        result.failures.emplace_back(buf);
      }
    }
    const double mae = sum / count;
    result.mae.emplace_back(e, mae);
    if (!(mae <= limit)) {
      std::snprintf(buf, sizeof buf, "%s MAE %.4f exceeds %.2f", std::string(estimator_name(e)).c_str(), mae, limit);
      result.failures.emplace_back(buf);
    }
  }

  if (!config.out_dir.empty()) {
    ensure_out_dir(config);
    write_text_file(out_path(config, "validate.csv"), validation_to_csv(result));
  }
  return result;
}

std::vector<IdReport> cmd_resolution_sweep(const RunConfig& config) {
  if (config.embeddings_path) throw ConfigError("resolution sweeps encode their own data; drop --embeddings");
  const auto estimators = chosen(config, {Estimator::FisherS});
  std::string param = config.sweep_param;
  std::vector<double> values = config.sweep_values;
  switch (config.encoder.kind) {
    case EncoderKind::SphericalHarmonics:
      if (param.empty()) param = "L";
      if (values.empty()) values = {10, 20, 40};
      break;
    case EncoderKind::RffHierarchical:
      if (param.empty()) param = "sigma-max";
      if (values.empty()) values = {256, 1024, 4096, 16384, 65536};
      break;
    case EncoderKind::SinusoidalMultiscale:
      if (param.empty()) param = "S";
      if (values.empty()) values = {4, 8, 16, 32};
      break;
    case EncoderKind::Raw:
      throw ConfigError("raw coordinates have no resolution parameter");
  }

  std::vector<IdReport> out;
  for (double v : values) {
    RunConfig run = config;
    EncoderSpec& spec = run.encoder;
    auto as_int = [&](double x) {
      if (x != std::floor(x) || x < 0 || x > 1e6) throw ConfigError("sweep value for " + param + " must be an integer");
      return static_cast<int>(x);
    };
    if (param == "L" && spec.kind == EncoderKind::SphericalHarmonics) {
      spec.L = as_int(v);
    } else if (param == "sigma-max" && spec.kind == EncoderKind::RffHierarchical) {
      spec.sigma_max = v;
    } else if (param == "sigma-min" && spec.kind == EncoderKind::RffHierarchical) {
      spec.sigma_min = v;
    } else if (param == "M" && spec.kind == EncoderKind::RffHierarchical) {
      spec.M = as_int(v);
    } else if (param == "S" && spec.kind == EncoderKind::SinusoidalMultiscale) {
      spec.S = as_int(v);
    } else if (param == "lambda-min" && spec.kind == EncoderKind::SinusoidalMultiscale) {
      spec.lambda_min = v;
    } else {
      throw ConfigError("cannot sweep '" + param + "' for encoder " + std::string(encoder_name(spec.kind)));
    }
    const Dataset data = prepare_dataset(run);
    auto reports = estimate_globals(data.emb.data, estimators, config.global_k(), run);
    for (IdReport& r : reports) {
      r.label = param + "=" + format_number(v);
      r.scheme = data.scheme;
      out.push_back(std::move(r));
    }
  }
  if (!config.out_dir.empty()) {
    ensure_out_dir(config);
    write_text_file(out_path(config, "resolution_sweep.csv"), reports_to_csv(out));
  }
  return out;
}

std::string validation_to_csv(const ValidationResult& result) {
  std::string out = "stage,estimator,mean,std,values\n";
  for (const ValidationRow& row : result.rows) {
    std::string values;
    for (std::size_t i = 0; i < row.values.size(); ++i) values += (i ? ";" : "") + format_number(row.values[i]);
    out += row.stage + ',' + std::string(estimator_name(row.estimator)) + ',' + format_number(row.mean) + ',' +
           format_number(row.std) + ',' + values + '\n';
  }
  for (const auto& [e, mae] : result.mae) {
    out += "mae," + std::string(estimator_name(e)) + ',' + format_number(mae) + ",,\n";
  }
  return out;
}

std::string validation_to_table(const ValidationResult& result) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s  %-8s  %s\n", "stage", "estimator", "mean +- std");
  out += buf;
  out += std::string(40, '-') + '\n';
  for (const ValidationRow& row : result.rows) {
    std::snprintf(buf, sizeof buf, "%-10s  %-8s  %.3f +- %.3f\n", row.stage.c_str(),
                  std::string(estimator_name(row.estimator)).c_str(), row.mean, row.std);
    out += buf;
  }
  for (const auto& [e, mae] : result.mae) {
    std::snprintf(buf, sizeof buf, "MAE %-8s %.3f\n", std::string(estimator_name(e)).c_str(), mae);
    out += buf;
  }
  if (result.passed()) {
    out += "validation: PASS\n";
  } else {
    out += "validation: FAIL\n";
    for (const auto& f : result.failures) out += "  " + f + '\n';
  }
  return out;
}

}  // namespace manifold_id

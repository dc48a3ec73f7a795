// manifold-id: intrinsic dimension of geographic embeddings.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "manifold_id/experiments.hpp"
#include "manifold_id/reports.hpp"

namespace mid = manifold_id;

namespace {

struct Options {
  mid::RunConfig config;
  std::string scheme = "sphere";
  std::string encoder = "raw";
  std::string head = "none";
  std::string estimators;
  std::string alpha_grid;
  std::string embeddings;
  std::string mask;
  std::string k_list;
  std::string values;
  std::string format = "emb1";
  std::string dtype = "f64";
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    const std::string field = text.substr(start, comma - start);
    T v{};
    const auto r = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || r.ec != std::errc{} || r.ptr != field.data() + field.size()) {
      throw mid::ConfigError(std::string("cannot parse ") + what + " value '" + field + "'");
    }
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

void add_sampling(CLI::App* app, Options& o) {
  app->add_option("--scheme", o.scheme, "Sampling scheme: fibonacci, sphere, land, grid, naive, stratified")
      ->capture_default_str();
  app->add_option("--n", o.config.n, "Number of points")->capture_default_str();
  app->add_option("--seed", o.config.seed, "Seed for every random stage")->capture_default_str();
  app->add_option("--mask", o.mask, "MSK1 land mask for --scheme land");
}

void add_encoder(CLI::App* app, Options& o) {
  auto& e = o.config.encoder;
  app->add_option("--encoder", o.encoder, "raw, sh, rff or multiscale")->capture_default_str();
  app->add_option("--L", e.L, "Spherical harmonics degree")->capture_default_str();
  app->add_option("--sigma-min", e.sigma_min, "RFF smallest scale")->capture_default_str();
  app->add_option("--sigma-max", e.sigma_max, "RFF largest scale")->capture_default_str();
  app->add_option("--M", e.M, "RFF levels")->capture_default_str();
  app->add_option("--features-per-level", e.features_per_level, "RFF features per level")->capture_default_str();
  app->add_option("--S", e.S, "Multiscale sinusoid count")->capture_default_str();
  app->add_option("--lambda-min", e.lambda_min, "Multiscale shortest wavelength (degrees)")->capture_default_str();
  app->add_option("--lambda-max", e.lambda_max, "Multiscale longest wavelength (degrees)")->capture_default_str();
  app->add_option("--head", o.head, "none, linear or siren")->capture_default_str();
  app->add_option("--head-width", e.head_width, "Head layer width")->capture_default_str();
  app->add_option("--head-depth", e.head_depth, "Head layer count")->capture_default_str();
  app->add_option("--omega0", e.omega0, "SIREN frequency")->capture_default_str();
}

void add_analysis(CLI::App* app, Options& o, bool estimators = true) {
  add_sampling(app, o);
  add_encoder(app, o);
  app->add_option("--embeddings", o.embeddings, "EMB1 or lon,lat,e0.. CSV instead of sampling");
  app->add_option("--k", o.config.k, "Neighbors (default 20, or 100 for local maps)");
  if (estimators) {
    app->add_option("--estimators", o.estimators, "Comma list of mle,mom,tle,twonn,corrint,ess,fishers or all");
  }
  app->add_option("--alpha-grid", o.alpha_grid, "FisherS margins as lo:hi:step or a comma list");
  app->add_option("--out", o.config.out_dir, "Directory for CSV/GeoJSON outputs");
  app->add_flag("--verbose", o.config.verbose, "Progress on stderr");
}

void finish(Options& o, const std::string& command) {
  auto& c = o.config;
  c.command = command;
  c.scheme = mid::parse_scheme(o.scheme);
  c.encoder.kind = mid::parse_encoder(o.encoder);
  c.encoder.head = mid::parse_head(o.head);
  if (!o.estimators.empty()) c.estimators = mid::parse_estimator_list(o.estimators);
  if (!o.alpha_grid.empty()) c.alpha_grid = mid::parse_alpha_grid(o.alpha_grid);
  if (!o.embeddings.empty()) c.embeddings_path = o.embeddings;
  if (!o.mask.empty()) c.mask_path = o.mask;
  if (!o.k_list.empty()) c.k_list = parse_list<mid::Index>(o.k_list, "k");
  if (!o.values.empty()) c.sweep_values = parse_list<double>(o.values, "sweep");
}

std::string out_file(const mid::RunConfig& config, const std::string& name) {
  std::filesystem::create_directories(config.out_dir.empty() ? "." : config.out_dir);
  return (std::filesystem::path(config.out_dir.empty() ? "." : config.out_dir) / name).string();
}

int run(int argc, char** argv) {
  CLI::App app{"Intrinsic dimension of geographic embeddings"};
  app.require_subcommand(1);
  Options o;

  auto* global = app.add_subcommand("global-id", "Global ID table with subsample mean and std");
  add_analysis(global, o);
  global->add_option("--subsamples", o.config.subsamples, "Subsample runs (0 disables)")->capture_default_str();
  global->add_option("--subsample-size", o.config.subsample_size, "Points per subsample")->capture_default_str();

  auto* local = app.add_subcommand("local-id", "Per-point ID maps as CSV and GeoJSON");
  add_analysis(local, o);

  auto* bands = app.add_subcommand("bands", "Global ID per 18 degree latitude band");
  add_analysis(bands, o);

  auto* sweep_k = app.add_subcommand("ksweep", "Global ID across neighbor counts");
  add_analysis(sweep_k, o);
  sweep_k->add_option("--k-list", o.k_list, "Comma list of k (default 5,10,20,50,100,200)");

  auto* validate = app.add_subcommand("validate", "Known-ID check on sphere data: raw, SH, SH+linear, SH+SIREN");
  add_sampling(validate, o);
  validate->add_option("--k", o.config.k, "Neighbors (default 20)");
  validate->add_option("--seeds", o.config.validate_seeds, "Seeds per stage")->capture_default_str();
  validate->add_option("--head-width", o.config.encoder.head_width, "Head layer width")->capture_default_str();
  validate->add_option("--head-depth", o.config.encoder.head_depth, "Head layer count")->capture_default_str();
  validate->add_option("--omega0", o.config.encoder.omega0, "SIREN frequency")->capture_default_str();
  validate->add_option("--alpha-grid", o.alpha_grid, "FisherS margins as lo:hi:step or a comma list");
  validate->add_option("--out", o.config.out_dir, "Directory for CSV outputs");
  validate->add_flag("--verbose", o.config.verbose, "Progress on stderr");

  auto* resolution = app.add_subcommand("resolution-sweep", "Global ID across encoder resolutions");
  add_analysis(resolution, o);
  resolution->add_option("--sweep", o.config.sweep_param, "L, sigma-max, sigma-min, M, S or lambda-min");
  resolution->add_option("--values", o.values, "Comma list of settings");

  auto* sample = app.add_subcommand("sample", "Write sampled points as lon,lat CSV");
  add_sampling(sample, o);
  sample->add_option("--out", o.config.out_dir, "Output directory");

  auto* encode = app.add_subcommand("encode", "Sample, encode and write embeddings");
  add_sampling(encode, o);
  add_encoder(encode, o);
  encode->add_option("--out", o.config.out_dir, "Output directory");
  encode->add_option("--format", o.format, "emb1 or csv")->capture_default_str();
  encode->add_option("--dtype", o.dtype, "EMB1 value type: f32 or f64")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto* sub = app.get_subcommands().front();
  finish(o, sub->get_name());
  const mid::RunConfig& config = o.config;

  if (sub == global) {
    const auto result = mid::cmd_global_id(config);
    std::cout << mid::reports_to_table(result.reports);
    if (result.fishers_profile) {
      std::printf("fishers alpha* = %s\n", mid::format_number(result.fishers_profile->alpha_star).c_str());
    }
  } else if (sub == local) {
    for (const auto& map : mid::cmd_local_id(config)) {
      std::printf("%s k=%lld: %lld of %lld points defined\n", std::string(mid::estimator_name(map.estimator)).c_str(),
                  static_cast<long long>(map.k), static_cast<long long>(map.defined_count()),
                  static_cast<long long>(map.size()));
    }
  } else if (sub == bands) {
    std::cout << mid::reports_to_table(mid::cmd_bands(config));
  } else if (sub == sweep_k) {
    std::cout << mid::reports_to_table(mid::cmd_ksweep(config));
  } else if (sub == validate) {
    std::cout << mid::validation_to_table(mid::cmd_validate(config));
  } else if (sub == resolution) {
    std::cout << mid::reports_to_table(mid::cmd_resolution_sweep(config));
  } else if (sub == sample) {
    std::optional<mid::LandMask> mask;
    if (config.mask_path) mask = mid::read_mask_file(*config.mask_path);
    const auto points = mid::sample_points(config.scheme, static_cast<std::size_t>(config.n), config.seed,
                                           mask ? &*mask : nullptr);
    if (points.fallback_warning) std::fprintf(stderr, "warning: scheme fell back to uniform sampling\n");
    const std::string path = out_file(config, "points.csv");
    mid::write_text_file(path, mid::points_to_csv(points));
    std::printf("wrote %zu points to %s\n", points.size(), path.c_str());
  } else if (sub == encode) {
    std::optional<mid::LandMask> mask;
    if (config.mask_path) mask = mid::read_mask_file(*config.mask_path);
    const auto points = mid::sample_points(config.scheme, static_cast<std::size_t>(config.n), config.seed,
                                           mask ? &*mask : nullptr);
    mid::EncoderSpec spec = config.encoder;
    spec.seed = config.seed;
    const auto emb = mid::encode(points, spec);
    std::string path;
    if (o.format == "csv") {
      path = out_file(config, "embeddings.csv");
      mid::write_text_file(path, mid::save_embeddings_csv(emb, points.points));
    } else if (o.format == "emb1") {
      if (o.dtype != "f32" && o.dtype != "f64") throw mid::ConfigError("dtype must be f32 or f64");
      path = out_file(config, "embeddings.emb1");
      mid::write_embeddings_file(path, emb, o.dtype == "f32" ? mid::EmbDtype::F32 : mid::EmbDtype::F64);
    } else {
      throw mid::ConfigError("format must be emb1 or csv");
    }
    std::printf("wrote %lld x %lld embedding (%s) to %s\n", static_cast<long long>(emb.rows()),
                static_cast<long long>(emb.cols()), spec.describe().c_str(), path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mid::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const mid::DegenerateDataError& e) {
    std::fprintf(stderr, "degenerate data: %s\n", e.what());
    return 3;
  } catch (const mid::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

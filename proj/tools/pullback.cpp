#include "pullback/datagen.hpp"
#include "pullback/error.hpp"
#include "pullback/eval.hpp"
#include "pullback/geometry.hpp"
#include "pullback/model_io.hpp"
#include "pullback/rae.hpp"
#include "pullback/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace pullback;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Relative output paths land in $PULLBACK_OUT_DIR when it is set.
std::string out_path(const std::string& path) {
  const char* dir = std::getenv("PULLBACK_OUT_DIR");
  if (!dir || !*dir || std::filesystem::path(path).is_absolute()) return path;
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / path).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::io, "cannot open '" + path + "' for writing");
  out << text;
  require(bool(out), ErrorKind::io, "failed writing '" + path + "'");
}

Vector parse_point(const std::string& text) {
  if (!text.empty() && text[0] == '@') {
    const Dataset d = load_dataset(text.substr(1));
    require(d.size() >= 1, ErrorKind::schema, "point file '" + text.substr(1) + "' has no rows");
    return d.samples.row(0).transpose();
  }
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    require(end != cell.c_str() && *end == '\0', ErrorKind::invalid_argument, "bad coordinate '" + cell + "'");
    values.push_back(v);
  }
  require(!values.empty(), ErrorKind::invalid_argument, "empty point");
  return Eigen::Map<Vector>(values.data(), Eigen::Index(values.size()));
}

std::string point_string(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

void check_dim(const Vector& v, std::size_t d, const char* what) {
  if (std::size_t(v.size()) != d)
    fail(ErrorKind::dimension_mismatch, std::string(what) + " has dimension " + std::to_string(v.size()) +
                                            ", model has " + std::to_string(d));
}

Route parse_route(const std::string& s) {
  if (s == "automatic") return Route::automatic;
  if (s == "general") return Route::general;
  if (s == "quadratic") return Route::quadratic;
  fail(ErrorKind::invalid_argument, "unknown route '" + s + "'");
}

// Key into the per-dataset training defaults, e.g. "hemisphere_2_3".
std::string dataset_key(const Dataset& d) {
  if (d.generator == "hemisphere" || d.generator == "sinusoid") {
    const auto i = d.parameters.find("intrinsic_dim");
    const auto a = d.parameters.find("ambient_dim");
    if (i != d.parameters.end() && a != d.parameters.end()) return d.generator + "_" + i->second + "_" + a->second;
  }
  return d.generator;
}

void print_config(const std::string& command, const std::vector<std::pair<std::string, std::string>>& items) {
  std::cerr << "config " << command << "\n";
  for (const auto& [k, v] : items) std::cerr << "  " << k << " = " << v << "\n";
}

struct ModelOpts {
  std::string model;
  std::string route = "automatic";
};

void add_model_opts(CLI::App* c, ModelOpts& o) {
  c->add_option("--model", o.model, "Model file")->required();
  c->add_option("--route", o.route, "automatic, general or quadratic")
      ->check(CLI::IsMember({"automatic", "general", "quadratic"}));
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::io: return 2;
    case ErrorKind::schema: return 3;
    case ErrorKind::dimension_mismatch: return 4;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pullback geometry of learned unimodal densities"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("pullback ") + kVersion + "\nmodel " + kModelSchema + "\ndataset " +
                           kDatasetSchema + "\neval " + kEvalSchema);

  std::uint64_t seed = 0;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  std::string gen_dataset, gen_out = "data.csv";
  std::size_t gen_n = 1000, gen_intrinsic = 0, gen_ambient = 0;
  LangevinOptions gen_lmc;
  gen->add_option("--dataset", gen_dataset, "banana, squeezed_banana, river, hemisphere or sinusoid")->required();
  gen->add_option("--n", gen_n, "Number of samples");
  gen->add_option("--intrinsic-dim", gen_intrinsic, "d' for hemisphere and sinusoid");
  gen->add_option("--ambient-dim", gen_ambient, "d for hemisphere and sinusoid");
  gen->add_option("--mcmc-steps", gen_lmc.steps, "Langevin steps per chain (T)");
  gen->add_option("--step-size", gen_lmc.step_size, "Langevin step size (delta)");
  gen->add_option("--seed", seed);
  gen->add_option("--out", gen_out);

  // train
  auto* tr = app.add_subcommand("train", "Train a density model");
  std::string tr_data, tr_variant = "ours", tr_config, tr_dataset, tr_out = "model.json", tr_history;
  std::vector<std::string> tr_set;
  double tr_test_fraction = 0.2;
  std::size_t tr_log_every = 10;
  tr->add_option("--data", tr_data, "Dataset CSV")->required();
  tr->add_option("--variant", tr_variant)->check(
      CLI::IsMember({"ours", "standard_nf", "anisotropic_nf", "isometric_nf"}));
  tr->add_option("--config", tr_config, "key = value overrides of the training defaults");
  tr->add_option("--dataset", tr_dataset, "Name selecting the built-in defaults (default: from the data sidecar)");
  tr->add_option("--set", tr_set, "Extra key=value override (repeatable)");
  tr->add_option("--test-fraction", tr_test_fraction, "Held-out share excluded from training");
  tr->add_option("--log-every", tr_log_every, "Print a progress line every N epochs (0 = never)");
  tr->add_option("--seed", seed);
  tr->add_option("--out", tr_out);
  tr->add_option("--history", tr_history, "Loss history CSV (default: <out>.history.csv)");

  // geometry queries
  ModelOpts geo_m, log_m, exp_m, dist_m, bar_m;
  std::string geo_from, geo_to, geo_out = "curve.csv";
  std::size_t geo_steps = 100;
  auto* geo = app.add_subcommand("geodesic", "Geodesic between two points");
  add_model_opts(geo, geo_m);
  geo->add_option("--from", geo_from)->required();
  geo->add_option("--to", geo_to)->required();
  geo->add_option("--steps", geo_steps, "Number of curve points (>= 2)");
  geo->add_option("--out", geo_out);

  std::string log_from, log_to;
  auto* lg = app.add_subcommand("logmap", "Logarithmic map log_x(y)");
  add_model_opts(lg, log_m);
  lg->add_option("--from", log_from, "Base point x")->required();
  lg->add_option("--to", log_to, "Target point y")->required();

  std::string exp_at, exp_v;
  auto* ex = app.add_subcommand("expmap", "Exponential map exp_x(v)");
  add_model_opts(ex, exp_m);
  ex->add_option("--at", exp_at, "Base point x")->required();
  ex->add_option("--tangent", exp_v, "Tangent vector v")->required();

  std::string dist_from, dist_to;
  auto* di = app.add_subcommand("distance", "Geodesic distance");
  add_model_opts(di, dist_m);
  di->add_option("--from", dist_from)->required();
  di->add_option("--to", dist_to)->required();

  std::string bar_points;
  auto* ba = app.add_subcommand("barycentre", "Riemannian barycentre of the rows of a CSV");
  add_model_opts(ba, bar_m);
  ba->add_option("--points", bar_points, "CSV with header x1,...,xd")->required();

  // rae
  std::string rd_model, rd_variances;
  double rd_eps = 0.01;
  auto* rd = app.add_subcommand("rae-dim", "Intrinsic dimension d_eps from learned variances");
  rd->add_option("--model", rd_model);
  rd->add_option("--variances", rd_variances, "Comma-separated variances instead of a model");
  rd->add_option("--epsilon", rd_eps);

  std::string rc_model, rc_data, rc_order = "all", rc_out = "rae_curve.csv", rc_space = "data";
  auto* rc = app.add_subcommand("rae-curve", "Reconstruction error against retained dimensions");
  rc->add_option("--model", rc_model)->required();
  rc->add_option("--data", rc_data)->required();
  rc->add_option("--order", rc_order)->check(CLI::IsMember({"decreasing", "increasing", "random", "all"}));
  rc->add_option("--space", rc_space, "data or latent")->check(CLI::IsMember({"data", "latent"}));
  rc->add_option("--seed", seed);
  rc->add_option("--out", rc_out);

  std::string rm_model, rm_out = "mesh.csv";
  double rm_eps = 0.01;
  std::size_t rm_per_axis = 20;
  auto* rm = app.add_subcommand("rae-mesh", "Decoded latent grid");
  rm->add_option("--model", rm_model)->required();
  rm->add_option("--epsilon", rm_eps);
  rm->add_option("--per-axis", rm_per_axis);
  rm->add_option("--out", rm_out);

  // eval
  std::string ev_model, ev_data, ev_dataset, ev_out = "report.json", ev_curves;
  EvalConfig ev_cfg;
  auto* ev = app.add_subcommand("eval", "Geodesic and variation error of one model");
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--data", ev_data, "Full dataset; the held-out split is used")->required();
  ev->add_option("--dataset", ev_dataset, "Ground truth (default: the model's dataset)");
  ev->add_option("--pairs", ev_cfg.pairs);
  ev->add_option("--steps", ev_cfg.steps);
  ev->add_option("--sigma-factor", ev_cfg.sigma_factor);
  ev->add_option("--test-fraction", ev_cfg.test_fraction);
  ev->add_option("--seed", seed);
  ev->add_option("--out", ev_out);
  ev->add_option("--curves", ev_curves, "Also dump learned and true geodesics of the first pair");

  std::string tb_data, tb_dataset, tb_config, tb_model_dir, tb_out = "table.json";
  std::vector<std::string> tb_variants{"ours", "standard_nf", "anisotropic_nf", "isometric_nf"}, tb_set;
  std::vector<std::uint64_t> tb_seeds{0, 1, 2};
  EvalConfig tb_cfg;
  auto* tb = app.add_subcommand("table", "Four-variant comparison on one dataset");
  tb->add_option("--data", tb_data)->required();
  tb->add_option("--dataset", tb_dataset, "Ground truth (default: the data sidecar)");
  tb->add_option("--variants", tb_variants)->delimiter(',');
  tb->add_option("--seeds", tb_seeds)->delimiter(',');
  tb->add_option("--config", tb_config);
  tb->add_option("--set", tb_set);
  tb->add_option("--model-dir", tb_model_dir, "Load <dataset>_<variant>_<seed>.json instead of training");
  tb->add_option("--pairs", tb_cfg.pairs);
  tb->add_option("--steps", tb_cfg.steps);
  tb->add_option("--sigma-factor", tb_cfg.sigma_factor);
  tb->add_option("--test-fraction", tb_cfg.test_fraction);
  tb->add_option("--seed", seed);
  tb->add_option("--out", tb_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 1;
  }

  auto load = [](const ModelOpts& o) {
    const TrainedModel m = load_model(o.model);
    return std::pair{m, manifold_of(m)};
  };

  try {
    if (*gen) {
      const std::string out = out_path(gen_out);
      print_config("gen", {{"dataset", gen_dataset},
                           {"n", std::to_string(gen_n)},
                           {"intrinsic_dim", std::to_string(gen_intrinsic)},
                           {"ambient_dim", std::to_string(gen_ambient)},
                           {"mcmc_steps", std::to_string(gen_lmc.steps)},
                           {"step_size", fmt(gen_lmc.step_size)},
                           {"seed", std::to_string(seed)},
                           {"out", out}});
      const Dataset d = generate_dataset(gen_dataset, gen_n, seed, gen_intrinsic, gen_ambient, gen_lmc);
      save_dataset(d, out);
      std::cout << "wrote " << d.size() << " x " << d.dim() << " samples to " << out << "\n";
    } else if (*tr) {
      const Dataset d = load_dataset(tr_data);
      const std::string key = tr_dataset.empty() ? dataset_key(d) : tr_dataset;
      TrainConfig cfg = tr_config.empty() ? TrainConfig::defaults_for(key) : load_train_config(tr_config, key);
      cfg.variant = parse_variant(tr_variant);
      if (cfg.dataset.empty()) cfg.dataset = key;
      for (const std::string& kv : tr_set) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos, ErrorKind::invalid_argument, "--set expects key=value, got '" + kv + "'");
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
      }
      cfg.seed = seed;
      const std::string out = out_path(tr_out);
      const std::string history = tr_history.empty() ? out + ".history.csv" : out_path(tr_history);
      const auto cfg_map = cfg.to_map();
      std::vector<std::pair<std::string, std::string>> items(cfg_map.begin(), cfg_map.end());
      items.emplace_back("data", tr_data);
      items.emplace_back("test_fraction", fmt(tr_test_fraction));
      items.emplace_back("out", out);
      items.emplace_back("history", history);
      print_config("train", items);

      const Split split = train_test_split(d.samples, tr_test_fraction, seed);
      const TrainResult r = train(split.train, cfg, [&](const EpochRecord& e) {
        if (tr_log_every && (e.epoch % tr_log_every == 0 || e.epoch == cfg.epochs))
          std::cerr << "epoch " << e.epoch << " nll " << e.nll << " vol " << e.vol << " iso " << e.iso << " total "
                    << e.total << " lr " << e.lr << "\n";
      });
      save_model(r.model, out);
      save_history_csv(r.history, history);
      std::cout << "wrote " << out << " (variances " << point_string(r.model.potential.variances()) << ")\n";
    } else if (*geo) {
      const auto [m, man] = load(geo_m);
      const Vector x = parse_point(geo_from), y = parse_point(geo_to);
      check_dim(x, man.dim(), "--from");
      check_dim(y, man.dim(), "--to");
      const std::string out = out_path(geo_out);
      print_config("geodesic", {{"model", geo_m.model},
                                {"route", geo_m.route},
                                {"from", point_string(x)},
                                {"to", point_string(y)},
                                {"steps", std::to_string(geo_steps)},
                                {"out", out}});
      const RowMatrix c = man.geodesic_curve(x, y, geo_steps, parse_route(geo_m.route));
      std::ostringstream s;
      s << "t";
      for (Eigen::Index j = 0; j < c.cols(); ++j) s << ",x_" << (j + 1);
      s << "\n";
      for (Eigen::Index k = 0; k < c.rows(); ++k) {
        s << fmt(double(k) / double(geo_steps - 1));
        for (Eigen::Index j = 0; j < c.cols(); ++j) s << "," << fmt(c(k, j));
        s << "\n";
      }
      write_text(out, s.str());
      std::cout << "wrote " << c.rows() << " points to " << out << "\n";
    } else if (*lg) {
      const auto [m, man] = load(log_m);
      const Vector x = parse_point(log_from), y = parse_point(log_to);
      check_dim(x, man.dim(), "--from");
      check_dim(y, man.dim(), "--to");
      print_config("logmap", {{"model", log_m.model}, {"route", log_m.route}, {"from", log_from}, {"to", log_to}});
      std::cout << point_string(man.log_map(x, y, parse_route(log_m.route))) << "\n";
    } else if (*ex) {
      const auto [m, man] = load(exp_m);
      const Vector x = parse_point(exp_at), v = parse_point(exp_v);
      check_dim(x, man.dim(), "--at");
      check_dim(v, man.dim(), "--tangent");
      print_config("expmap", {{"model", exp_m.model}, {"route", exp_m.route}, {"at", exp_at}, {"tangent", exp_v}});
      std::cout << point_string(man.exp_map(x, v, parse_route(exp_m.route))) << "\n";
    } else if (*di) {
      const auto [m, man] = load(dist_m);
      const Vector x = parse_point(dist_from), y = parse_point(dist_to);
      check_dim(x, man.dim(), "--from");
      check_dim(y, man.dim(), "--to");
      print_config("distance", {{"model", dist_m.model}, {"route", dist_m.route}, {"from", dist_from}, {"to", dist_to}});
      std::cout << fmt(man.distance(x, y, parse_route(dist_m.route))) << "\n";
    } else if (*ba) {
      const auto [m, man] = load(bar_m);
      const Dataset pts = load_dataset(bar_points);
      require(pts.dim() == man.dim(), ErrorKind::dimension_mismatch,
              "points have dimension " + std::to_string(pts.dim()) + ", model has " + std::to_string(man.dim()));
      print_config("barycentre", {{"model", bar_m.model}, {"route", bar_m.route}, {"points", bar_points}});
      std::cout << point_string(man.barycentre(pts.samples, parse_route(bar_m.route))) << "\n";
    } else if (*rd) {
      require(rd_model.empty() != rd_variances.empty(), ErrorKind::invalid_argument,
              "give exactly one of --model and --variances");
      const Vector lambda = rd_model.empty() ? parse_point(rd_variances) : load_model(rd_model).potential.variances();
      print_config("rae-dim", {{"source", rd_model.empty() ? "variances" : rd_model}, {"epsilon", fmt(rd_eps)}});
      require((lambda.array() > 0.0).all(), ErrorKind::invalid_argument, "variances must be positive");
      const RaeConfig c = RaeConfig::from_variances(lambda, rd_eps);
      std::string order;
      for (std::size_t i : c.order) order += (order.empty() ? "" : ",") + std::to_string(i + 1);
      std::cout << "d_eps " << c.latent_dim << "\nvariances " << point_string(lambda) << "\norder " << order << "\n";
    } else if (*rc) {
      const TrainedModel m = load_model(rc_model);
      const Dataset d = load_dataset(rc_data);
      require(d.dim() == m.flow.dim(), ErrorKind::dimension_mismatch,
              "data has dimension " + std::to_string(d.dim()) + ", model has " + std::to_string(m.flow.dim()));
      const std::string out = out_path(rc_out);
      print_config("rae-curve", {{"model", rc_model},
                                 {"data", rc_data},
                                 {"order", rc_order},
                                 {"space", rc_space},
                                 {"seed", std::to_string(seed)},
                                 {"out", out}});
      std::vector<AxisOrder> orders;
      if (rc_order == "all") orders = {AxisOrder::decreasing, AxisOrder::increasing, AxisOrder::random};
      else orders = {parse_axis_order(rc_order)};
      std::ostringstream s;
      s << "k,mean_error,order,seed\n";
      for (AxisOrder o : orders) {
        const auto c = reconstruction_curve(m.flow, m.potential, d.samples, o, seed,
                                            rc_space == "latent" ? ErrorSpace::latent : ErrorSpace::data);
        for (std::size_t k = 0; k < c.mean_error.size(); ++k)
          s << k << "," << fmt(c.mean_error[k]) << "," << to_string(o) << "," << seed << "\n";
      }
      write_text(out, s.str());
      std::cout << "wrote " << out << "\n";
    } else if (*rm) {
      const TrainedModel m = load_model(rm_model);
      const std::string out = out_path(rm_out);
      print_config("rae-mesh",
                   {{"model", rm_model}, {"epsilon", fmt(rm_eps)}, {"per_axis", std::to_string(rm_per_axis)}, {"out", out}});
      const RiemannianAutoencoder rae(std::make_shared<Flow>(m.flow), m.potential, rm_eps);
      const ManifoldMesh mesh = manifold_mesh(rae, rm_per_axis);
      std::ostringstream s;
      for (Eigen::Index j = 0; j < mesh.latent.cols(); ++j) s << (j ? "," : "") << "z_" << (j + 1);
      for (Eigen::Index j = 0; j < mesh.points.cols(); ++j) s << ",x_" << (j + 1);
      s << "\n";
      for (Eigen::Index r = 0; r < mesh.points.rows(); ++r) {
        for (Eigen::Index j = 0; j < mesh.latent.cols(); ++j) s << (j ? "," : "") << fmt(mesh.latent(r, j));
        for (Eigen::Index j = 0; j < mesh.points.cols(); ++j) s << "," << fmt(mesh.points(r, j));
        s << "\n";
      }
      write_text(out, s.str());
      std::cout << "wrote " << mesh.points.rows() << " mesh points (d_eps " << rae.latent_dim() << ") to " << out
                << "\n";
    } else if (*ev) {
      const TrainedModel m = load_model(ev_model);
      const Dataset d = load_dataset(ev_data);
      const std::string dataset = ev_dataset.empty() ? m.dataset : ev_dataset;
      ev_cfg.seed = seed;
      const std::string out = out_path(ev_out);
      print_config("eval", {{"model", ev_model},
                            {"data", ev_data},
                            {"dataset", dataset},
                            {"pairs", std::to_string(ev_cfg.pairs)},
                            {"steps", std::to_string(ev_cfg.steps)},
                            {"sigma_factor", fmt(ev_cfg.sigma_factor)},
                            {"test_fraction", fmt(ev_cfg.test_fraction)},
                            {"seed", std::to_string(seed)},
                            {"out", out}});
      const Split split = train_test_split(d.samples, ev_cfg.test_fraction, seed);
      EvalReport report;
      report.config = ev_cfg;
      EvalCell cell = evaluate_model(m, dataset, split.test, ev_cfg);
      cell.hyperparameters["model"] = ev_model;
      report.cells.push_back(cell);
      report.summary.push_back(cell);
      write_text(out, report.to_json());
      write_text(out + ".csv", report.to_csv());
      if (!ev_curves.empty()) {
        const PairSet pairs = sample_pairs(split.test, 1, seed);
        const PullbackManifold learned = manifold_of(m), truth = ground_truth_manifold(dataset);
        write_text(out_path(ev_curves),
                   geodesic_curves_csv({{m.variant, &learned}, {"ground_truth", &truth}}, pairs.from.row(0).transpose(),
                                       pairs.to.row(0).transpose(), ev_cfg.steps));
      }
      std::cout << "geodesic_error " << fmt(cell.geodesic.mean) << " " << fmt(cell.geodesic.std) << "\n"
                << "variation_error " << fmt(cell.variation.mean) << " " << fmt(cell.variation.std) << "\n";
    } else if (*tb) {
      const Dataset d = load_dataset(tb_data);
      const std::string dataset = tb_dataset.empty() ? dataset_key(d) : tb_dataset;
      tb_cfg.seed = seed;
      const std::string out = out_path(tb_out);
      TrainConfig base = tb_config.empty() ? TrainConfig::defaults_for(dataset) : load_train_config(tb_config, dataset);
      if (base.dataset.empty()) base.dataset = dataset;
      for (const std::string& kv : tb_set) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos, ErrorKind::invalid_argument, "--set expects key=value, got '" + kv + "'");
        base.apply(kv.substr(0, eq), kv.substr(eq + 1));
      }
      const auto base_map = base.to_map();
      std::vector<std::pair<std::string, std::string>> items(base_map.begin(), base_map.end());
      std::string seeds, variants;
      for (auto s : tb_seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
      for (const auto& v : tb_variants) variants += (variants.empty() ? "" : ",") + v;
      items.insert(items.end(), {{"data", tb_data},
                                 {"variants", variants},
                                 {"seeds", seeds},
                                 {"model_dir", tb_model_dir},
                                 {"pairs", std::to_string(tb_cfg.pairs)},
                                 {"steps", std::to_string(tb_cfg.steps)},
                                 {"sigma_factor", fmt(tb_cfg.sigma_factor)},
                                 {"test_fraction", fmt(tb_cfg.test_fraction)},
                                 {"out", out}});
      print_config("table", items);

      const Split split = train_test_split(d.samples, tb_cfg.test_fraction, seed);
      std::vector<TableJob> jobs;
      for (const std::string& v : tb_variants) {
        const Variant variant = parse_variant(v);
        for (std::uint64_t s : tb_seeds) {
          TrainConfig cfg = base;
          cfg.variant = variant;
          cfg.seed = seed + s;
          TableJob job{dataset, v, s, {}, cfg.to_map()};
          if (!tb_model_dir.empty()) {
            const std::string path =
                (std::filesystem::path(tb_model_dir) / (dataset + "_" + v + "_" + std::to_string(s) + ".json")).string();
            job.model = [path] { return load_model(path); };
          } else {
            job.model = [cfg, &split, v, s] {
              std::cerr << "training " << v << " seed " << s << "\n";
              return train(split.train, cfg).model;
            };
          }
          jobs.push_back(std::move(job));
        }
      }
      const EvalReport report = run_table(jobs, {{dataset, split.test}}, tb_cfg);
      write_text(out, report.to_json());
      write_text(out + ".csv", report.to_csv());
      for (const EvalCell& c : report.summary) {
        if (c.ok)
          std::cout << c.variant << " geodesic " << fmt(c.geodesic.mean) << " (" << fmt(c.geodesic.std) << ") variation "
                    << fmt(c.variation.mean) << " (" << fmt(c.variation.std) << ")\n";
        else
          std::cout << c.variant << " failed: " << c.error << "\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "spectraforge/cli.hpp"

#include "spectraforge/cube.hpp"
#include "spectraforge/eigensolver.hpp"
#include "spectraforge/io.hpp"
#include "spectraforge/metrics.hpp"
#include "spectraforge/model.hpp"
#include "spectraforge/pipeline.hpp"
#include "spectraforge/service.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace spectraforge {
namespace {

const std::set<std::string> kPathKeys = {"out",  "dataset", "model", "mesh",     "region",       "encoding",
                                         "a",    "b",       "cache", "loss-csv", "matrix-market"};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> config_values(const std::string& raw) {
  const std::string v = trim(raw);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') return {unquote(v)};
  std::vector<std::string> out;
  std::stringstream ss(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(unquote(item));
  }
  return out;
}

bool has_flag(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

struct RecipeFlags {
  std::string op = "pat";
  int k = 15;
  int h = 15;
  double potential_scale = 1e4;
  double orthogonality_scale = 1.0;
  int neighbors = 12;
  std::uint64_t eigen_seed = 0;

  void add(CLI::App* app) {
    app->add_option("--op", op, "local operator: pat, ham, lmh, or lbo for the global spectrum only")
        ->capture_default_str();
    app->add_option("--k", k, "global eigenvalues")->capture_default_str()->check(CLI::Range(2, 100000));
    app->add_option("--h", h, "eigenvalues per region")->capture_default_str()->check(CLI::Range(2, 100000));
    app->add_option("--potential-scale", potential_scale, "tau as a multiple of the mean of 30 global eigenvalues")
        ->capture_default_str();
    app->add_option("--orthogonality-scale", orthogonality_scale, "LMH mu as a multiple of tau")->capture_default_str();
    app->add_option("--neighbors", neighbors, "k-NN size for point clouds")->capture_default_str();
    app->add_option("--eigen-seed", eigen_seed, "eigensolver start block seed")->capture_default_str();
  }

  EncodingRecipe recipe() const {
    EncodingRecipe r;
    if (op != "lbo" && op != "none") r.local = parse_local_operator(op);
    r.k = k;
    r.h = h;
    r.potential_scale = potential_scale;
    r.orthogonality_scale = orthogonality_scale;
    r.neighbors = neighbors;
    r.seed = eigen_seed;
    return r;
  }
};

Mesh load_shape(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".xyz") return Mesh{load_point_cloud(path).vertices, Faces()};
  return load_mesh(path);
}

std::vector<Region> load_regions(const std::vector<std::string>& paths, Index n) {
  std::vector<Region> out;
  for (const auto& p : paths) out.push_back(load_region(p, n));
  return out;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
  } else {
    write_text_file(path, text);
  }
}

SpectralEncoding read_encoding(const std::string& path) { return encoding_from_json(read_text_file(path)); }

std::vector<SpectralEncoding> dataset_encodings(const Dataset& data, const EncodingRecipe& recipe,
                                                const std::filesystem::path& cache, std::ostream& err) {
  const auto progress = [&err](std::size_t done, std::size_t total) {
    if (done % 100 == 0 || done == total) err << "spectra " << done << "/" << total << "\n";
  };
  const auto spectra = cache.empty() ? compute_dataset_spectra(data, recipe, progress)
                                     : cached_dataset_spectra(data, recipe, cache, progress);
  std::vector<SpectralEncoding> out;
  out.reserve(spectra.size());
  for (const auto& s : spectra) out.push_back(encode_spectra(s, recipe.k, recipe.h));
  return out;
}

std::filesystem::path default_cache(const std::string& dataset) {
  std::filesystem::path p(dataset);
  if (p.filename() == "manifest.json") p = p.parent_path();
  return p / "cache";
}

std::array<int, 3> parse_hidden(const std::string& text) {
  std::array<int, 3> out{};
  std::stringstream ss(text);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) throw Error("--hidden takes exactly three sizes, got '" + text + "'");
    out[static_cast<std::size_t>(i++)] = std::stoi(item);
  }
  if (i != 3) throw Error("--hidden takes exactly three sizes, got '" + text + "'");
  return out;
}

std::set<std::string> option_names(const CLI::App* app) {
  std::set<std::string> names;
  for (const CLI::Option* opt : app->get_options()) {
    for (const auto& name : opt->get_lnames()) names.insert(name);
  }
  return names;
}

std::string find_subcommand(const std::vector<std::string>& args) {
  for (const auto& a : args) {
    if (!a.empty() && a[0] != '-') return a;
  }
  return "";
}

std::string find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return "";
}

}  // namespace

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line, section;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw ParseError("config: expected key = value", number);
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::vector<std::string> merge_config(const std::vector<std::string>& args, const std::string& subcommand,
                                      const std::map<std::string, std::string>& config,
                                      const std::set<std::string>& known_options,
                                      const std::filesystem::path& base_dir) {
  std::vector<std::string> out = args;
  auto apply = [&](const std::string& key, const std::string& raw) {
    if (key == "config" || has_flag(args, key)) return;
    const auto values = config_values(raw);
    if (values.size() == 1 && values[0] == "false") return;
    if (values.size() == 1 && values[0] == "true") {
      out.push_back("--" + key);
      return;
    }
    for (const auto& v : values) {
      out.push_back("--" + key);
      out.push_back(kPathKeys.count(key) && !v.empty() && v != "-" && std::filesystem::path(v).is_relative()
                        ? (base_dir / v).lexically_normal().string()
                        : v);
    }
  };
  const std::string prefix = subcommand + ".";
  for (const auto& [key, value] : config) {
    if (key.find('.') == std::string::npos) {
      if (known_options.count(key)) apply(key, value);
    } else if (key.rfind(prefix, 0) == 0) {
      const std::string name = key.substr(prefix.size());
      if (!known_options.count(name)) throw Error("config: '" + subcommand + "' has no option '" + name + "'");
      apply(name, value);
    }
  }
  return out;
}

int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shape reconstruction from concatenated global and local Laplacian spectra", "spectraforge"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  std::string config_path;
  std::function<void()> run;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value settings file; flags take precedence");
  };

  // gen-cube
  CubeDatasetOptions cube_options;
  std::string out_path;
  std::uint64_t seed = 0;
  {
    auto* sub = app.add_subcommand("gen-cube", "generate the cube dataset (patterns x depths)");
    add_config(sub);
    sub->add_option("--out", out_path, "output directory")->required();
    sub->add_option("--face-res", cube_options.face_resolution, "front face resolution")->capture_default_str();
    sub->add_option("--patterns", cube_options.pattern_count, "number of patterns")->capture_default_str();
    sub->add_option("--depths", cube_options.depth_count, "number of depth factors")->capture_default_str();
    sub->add_option("--extrusion", cube_options.extrusion_height, "pattern extrusion height")->capture_default_str();
    sub->add_option("--seed", seed, "split seed")->capture_default_str();
    sub->callback([&] {
      run = [&] {
        const Dataset data = generate_cube_dataset(cube_options, seed);
        save_dataset(data, out_path);
        out << "wrote " << data.size() << " shapes (" << data.split.train.size() << " train, "
            << data.split.test.size() << " test) to " << out_path << "\n";
      };
    });
  }

  // spectrum / encode share the single-shape flags
  RecipeFlags recipe_flags;
  std::string mesh_path, matrix_market;
  std::vector<std::string> region_paths;
  {
    auto* sub = app.add_subcommand("spectrum", "global and local eigenvalues of one shape");
    add_config(sub);
    sub->add_option("--mesh", mesh_path, "OFF/OBJ mesh or XYZ point cloud")->required()->check(CLI::ExistingFile);
    sub->add_option("--region", region_paths, "region index file (repeatable)")->check(CLI::ExistingFile);
    sub->add_option("--matrix-market", matrix_market, "also write <prefix>_L.mtx and <prefix>_M.mtx");
    sub->add_option("--out", out_path, "output JSON (default stdout)");
    recipe_flags.add(sub);
    sub->callback([&] {
      run = [&] {
        const Mesh shape = load_shape(mesh_path);
        const auto regions = load_regions(region_paths, shape.num_vertices());
        const EncodingRecipe recipe = recipe_flags.recipe();
        if (!matrix_market.empty()) {
          const OperatorPair lbo = shape_laplacian(shape, recipe.neighbors);
          std::ofstream l(matrix_market + "_L.mtx"), m(matrix_market + "_M.mtx");
          write_matrix_market(l, lbo.stiffness.matrix);
          SparseMatrix mass(lbo.dimension(), lbo.dimension());
          for (Index i = 0; i < lbo.dimension(); ++i) mass.insert(i, i) = lbo.mass.diagonal(i);
          write_matrix_market(m, mass);
        }
        emit(out_path, spectra_to_json({compute_spectra(shape, regions, recipe)}, recipe), out);
      };
    });
  }
  {
    auto* sub = app.add_subcommand("encode", "spectral encoding of one shape");
    add_config(sub);
    sub->add_option("--mesh", mesh_path, "OFF/OBJ mesh or XYZ point cloud")->required()->check(CLI::ExistingFile);
    sub->add_option("--region", region_paths, "region index file (repeatable)")->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "output JSON (default stdout)");
    recipe_flags.add(sub);
    sub->callback([&] {
      run = [&] {
        const Mesh shape = load_shape(mesh_path);
        const auto regions = load_regions(region_paths, shape.num_vertices());
        emit(out_path, encoding_to_json(encode_shape(shape, regions, recipe_flags.recipe())), out);
      };
    });
  }

  // train
  std::string dataset_path, cache_dir, loss_csv, hidden = "258,1024,2048";
  TrainConfig train_config;
  ModelOptions model_options;
  std::string loss_name = "frobenius";
  int log_every = 10;
  bool no_cache = false;
  {
    auto* sub = app.add_subcommand("train", "train a decoder on a dataset's train split");
    add_config(sub);
    sub->add_option("--dataset", dataset_path, "dataset directory or manifest")->required();
    sub->add_option("--out", out_path, "checkpoint path")->required();
    sub->add_option("--loss-csv", loss_csv, "loss history CSV (default <out>.loss.csv)");
    sub->add_option("--cache", cache_dir, "spectra cache directory (default <dataset>/cache)");
    sub->add_flag("--no-cache", no_cache, "always recompute spectra");
    recipe_flags.add(sub);
    sub->add_option("--epochs", train_config.epochs)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--batch-size", train_config.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--lr", train_config.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--late-lr", train_config.late_learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--lr-switch-epoch", train_config.schedule_switch_epoch)->capture_default_str();
    sub->add_option("--loss", loss_name, "frobenius or chamfer")->capture_default_str();
    sub->add_option("--seed", train_config.seed, "shuffle and dropout seed")->capture_default_str();
    sub->add_option("--init-seed", model_options.init_seed, "weight initialization seed")->capture_default_str();
    sub->add_option("--hidden", hidden, "three hidden layer sizes")->capture_default_str();
    sub->add_option("--dropout", model_options.dropout)->capture_default_str()->check(CLI::Range(0.0, 0.999));
    sub->add_option("--log-every", log_every, "progress line every N epochs")->capture_default_str();
    sub->callback([&] {
      run = [&] {
        const Dataset data = load_dataset(dataset_path);
        const EncodingRecipe recipe = recipe_flags.recipe();
        const std::filesystem::path cache = no_cache ? std::filesystem::path() : (cache_dir.empty() ? default_cache(dataset_path) : std::filesystem::path(cache_dir));
        const auto encodings = dataset_encodings(data, recipe, cache, err);
        train_config.loss = parse_loss_kind(loss_name);
        model_options.hidden = parse_hidden(hidden);
        const ShapeModel model =
            fit_model(data, encodings, recipe, model_options, train_config, [&](int epoch, double tr, double te) {
              if (log_every > 0 && ((epoch + 1) % log_every == 0 || epoch + 1 == train_config.epochs)) {
                char line[128];
                std::snprintf(line, sizeof(line), "epoch %d train %.6g test %.6g\n", epoch + 1, tr, te);
                err << line;
              }
            });
        save_checkpoint(model, out_path);
        write_text_file(loss_csv.empty() ? out_path + ".loss.csv" : loss_csv, history_csv(model.history));
        out << model.recipe.name(model.layout.size() - 1) << " model " << model.fingerprint() << " -> " << out_path
            << (model.history.diverged ? " (training diverged; last finite parameters kept)" : "") << "\n";
        if (model.history.diverged) throw Error("training diverged at epoch " + std::to_string(model.history.epochs()));
      };
    });
  }

  // reconstruct / swap / interpolate
  std::string model_path, encoding_path, a_path, b_path, encoding_out;
  std::vector<std::string> labels;
  double t = 0.5;
  int steps = 0;
  auto load_model = [&] { return load_checkpoint(std::filesystem::path(model_path)); };
  auto write_mesh = [&](const Mesh& mesh, const std::string& path) {
    if (mesh.num_faces() == 0 && std::filesystem::path(path).extension() == ".xyz") {
      save_point_cloud(PointCloud{mesh.vertices}, path);
    } else {
      save_mesh(mesh, path);
    }
  };
  {
    auto* sub = app.add_subcommand("reconstruct", "decode an encoding (or a shape's encoding) into a mesh");
    add_config(sub);
    sub->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
    auto* enc = sub->add_option("--encoding", encoding_path, "encoding JSON")->check(CLI::ExistingFile);
    auto* mesh = sub->add_option("--mesh", mesh_path, "encode this shape with the model's recipe")->check(CLI::ExistingFile);
    sub->add_option("--region", region_paths, "regions of --mesh")->check(CLI::ExistingFile);
    enc->excludes(mesh);
    sub->add_option("--out", out_path, "output mesh (.off, .obj, .xyz)")->required();
    sub->callback([&] {
      run = [&] {
        const ShapeModel model = load_model();
        SpectralEncoding encoding;
        if (!encoding_path.empty()) {
          encoding = read_encoding(encoding_path);
        } else if (!mesh_path.empty()) {
          const Mesh shape = load_shape(mesh_path);
          encoding = encode_shape(shape, load_regions(region_paths, shape.num_vertices()), model.recipe);
        } else {
          throw CLI::RequiredError("--encoding or --mesh");
        }
        write_mesh(reconstruct(model, encoding), out_path);
        out << "wrote " << out_path << "\n";
      };
    });
  }
  {
    auto* sub = app.add_subcommand("swap", "take segments of encoding B into encoding A and decode");
    add_config(sub);
    sub->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--a", a_path, "encoding A")->required()->check(CLI::ExistingFile);
    sub->add_option("--b", b_path, "encoding B")->required()->check(CLI::ExistingFile);
    sub->add_option("--take", labels, "segments taken from B (default: every local segment)");
    sub->add_option("--out", out_path, "output mesh")->required();
    sub->add_option("--encoding-out", encoding_out, "also write the mixed encoding");
    sub->callback([&] {
      run = [&] {
        const ShapeModel model = load_model();
        const SpectralEncoding a = read_encoding(a_path), b = read_encoding(b_path);
        std::set<std::string> take(labels.begin(), labels.end());
        if (take.empty()) {
          for (const auto& s : a.layout) {
            if (s.label != kGlobalLabel) take.insert(s.label);
          }
        }
        const SpectralEncoding mixed = swap_segments(a, b, take);
        write_mesh(reconstruct(model, mixed), out_path);
        if (!encoding_out.empty()) write_text_file(encoding_out, encoding_to_json(mixed));
        out << "wrote " << out_path << "\n";
      };
    });
  }
  {
    auto* sub = app.add_subcommand("interpolate", "blend segments of two encodings and decode");
    add_config(sub);
    sub->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--a", a_path, "encoding at t = 0")->required()->check(CLI::ExistingFile);
    sub->add_option("--b", b_path, "encoding at t = 1")->required()->check(CLI::ExistingFile);
    sub->add_option("--segments", labels, "segments to blend (default: all)");
    sub->add_option("--t", t, "blend weight")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    sub->add_option("--steps", steps, "write N+1 frames <out>_000.. for t = 0..1 instead of one mesh")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_path, "output mesh or frame prefix")->required();
    sub->callback([&] {
      run = [&] {
        const ShapeModel model = load_model();
        const SpectralEncoding a = read_encoding(a_path), b = read_encoding(b_path);
        const std::set<std::string> segments(labels.begin(), labels.end());
        if (steps == 0) {
          write_mesh(reconstruct(model, interpolate(a, b, t, segments)), out_path);
          out << "wrote " << out_path << "\n";
          return;
        }
        const std::filesystem::path prefix(out_path);
        const std::string ext = prefix.has_extension() ? prefix.extension().string() : ".off";
        for (int i = 0; i <= steps; ++i) {
          char frame[16];
          std::snprintf(frame, sizeof(frame), "_%03d", i);
          const auto path = prefix.parent_path() / (prefix.stem().string() + frame + ext);
          write_mesh(reconstruct(model, interpolate(a, b, static_cast<double>(i) / steps, segments)), path.string());
        }
        out << "wrote " << steps + 1 << " frames\n";
      };
    });
  }

  // stats
  std::vector<std::string> at_max;
  {
    auto* sub = app.add_subcommand("stats", "per-dimension encoding ranges of a model or a dataset's train split");
    add_config(sub);
    auto* model_opt = sub->add_option("--model", model_path, "checkpoint")->check(CLI::ExistingFile);
    auto* data_opt = sub->add_option("--dataset", dataset_path, "dataset directory or manifest");
    model_opt->excludes(data_opt);
    sub->add_option("--cache", cache_dir, "spectra cache directory (default <dataset>/cache)");
    recipe_flags.add(sub);
    sub->add_option("--at-max", at_max, "write the extreme encoding with these segments at their maximum");
    sub->add_option("--out", out_path, "output JSON (default stdout)");
    sub->callback([&] {
      run = [&] {
        EncodingStats stats;
        if (!model_path.empty()) {
          stats = load_model().stats;
        } else if (!dataset_path.empty()) {
          const Dataset data = load_dataset(dataset_path);
          const auto encodings =
              dataset_encodings(data, recipe_flags.recipe(), cache_dir.empty() ? default_cache(dataset_path) : std::filesystem::path(cache_dir), err);
          std::vector<SpectralEncoding> train;
          for (int i : data.split.train) train.push_back(encodings[static_cast<std::size_t>(i)]);
          stats = dataset_stats(train);
        } else {
          throw CLI::RequiredError("--model or --dataset");
        }
        const bool extremes = !at_max.empty();
        emit(out_path,
             extremes ? encoding_to_json(mix_extremes(stats, std::set<std::string>(at_max.begin(), at_max.end())))
                      : stats_to_json(stats),
             out);
      };
    });
  }

  // evaluate
  EvaluateOptions eval_options;
  bool no_geodesics = false;
  {
    auto* sub = app.add_subcommand("evaluate", "error measures of a model on a dataset's test split");
    add_config(sub);
    sub->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--dataset", dataset_path, "dataset directory or manifest")->required();
    sub->add_option("--cache", cache_dir, "spectra cache directory (default <dataset>/cache)");
    sub->add_option("--samples", eval_options.samples, "geodesic source samples")->capture_default_str();
    sub->add_option("--sample-seed", eval_options.sample_seed)->capture_default_str();
    sub->add_flag("--no-geodesics", no_geodesics, "skip the metric distortion columns");
    sub->add_option("--out", out_path, "report JSON (the table goes to stdout)");
    sub->callback([&] {
      run = [&] {
        const ShapeModel model = load_model();
        const Dataset data = load_dataset(dataset_path);
        const auto encodings =
            dataset_encodings(data, model.recipe, cache_dir.empty() ? default_cache(dataset_path) : std::filesystem::path(cache_dir), err);
        eval_options.geodesics = !no_geodesics;
        const EvalReport report = evaluate_model(model, data, encodings, eval_options);
        if (report.excluded_pairs > 0) {
          err << "warning: " << report.excluded_pairs << " unreachable geodesic pairs excluded\n";
        }
        if (!out_path.empty()) write_text_file(out_path, report_to_json(report));
        out << format_report_table({report});
      };
    });
  }

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  {
    auto* sub = app.add_subcommand("serve", "HTTP inference service");
    add_config(sub);
    sub->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--host", host)->capture_default_str();
    sub->add_option("--port", port, "0 picks a free port")->capture_default_str()->check(CLI::Range(0, 65535));
    sub->callback([&] {
      run = [&] {
        InferenceService service(load_model());
        const int bound = service.bind(host, port);
        out << "serving " << service.model().recipe.name(service.model().layout.size() - 1) << " on http://" << host
            << ":" << bound << std::endl;
        service.listen();
      };
    });
  }

  std::vector<std::string> args = raw_args;
  try {
    const std::string config = find_config(args);
    if (!config.empty()) {
      const std::string name = find_subcommand(args);
      const CLI::App* sub = name.empty() ? nullptr : app.get_subcommand_no_throw(name);
      if (sub) {
        std::set<std::string> known = option_names(sub);
        args = merge_config(args, name, parse_config(read_text_file(config)), known,
                            std::filesystem::absolute(config).parent_path());
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (run) run();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace spectraforge

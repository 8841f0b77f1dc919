#include "spectraforge/pipeline.hpp"

#include "spectraforge/eigensolver.hpp"
#include "spectraforge/io.hpp"

#include "fnv.hpp"
#include "json_support.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace spectraforge {
namespace {

constexpr int kPotentialReferenceCount = 30;

bool needs_potential(const EncodingRecipe& recipe) {
  return recipe.local && (*recipe.local == LocalOperator::HAM || *recipe.local == LocalOperator::LMH);
}

void validate_recipe(const EncodingRecipe& recipe) {
  if (recipe.k < 2) throw Error("k must be at least 2, got " + std::to_string(recipe.k));
  if (recipe.local && recipe.h < 2) throw Error("h must be at least 2, got " + std::to_string(recipe.h));
  if (!(recipe.potential_scale > 0.0)) throw Error("potential scale must be positive");
  if (!(recipe.orthogonality_scale >= 0.0)) throw Error("orthogonality scale must be nonnegative");
}

OperatorPair local_operator(const Mesh& shape, const OperatorPair& lbo, const Region& region,
                            const EncodingRecipe& recipe, double tau, const Eigen::MatrixXd& basis) {
  switch (*recipe.local) {
    case LocalOperator::PAT:
      if (shape.num_faces() == 0) {
        Vertices subset(static_cast<Index>(region.indices.size()), 3);
        for (std::size_t i = 0; i < region.indices.size(); ++i) {
          subset.row(static_cast<Index>(i)) = shape.vertices.row(region.indices[i]);
        }
        return pointcloud_laplacian(subset, std::min<int>(recipe.neighbors, static_cast<int>(subset.rows()) - 1));
      }
      return pat_operator(shape, region);
    case LocalOperator::HAM:
      return ham_operator(lbo, region, tau);
    case LocalOperator::LMH:
      return lmh_operator(lbo, region, tau, recipe.orthogonality_scale * tau, basis);
  }
  throw Error("unhandled local operator");
}

std::uint64_t dataset_fingerprint(const Dataset& dataset) {
  std::uint64_t hash = kFnvOffset;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Mesh& m = dataset.shapes[i];
    hash = fnv1a64(m.vertices.data(), sizeof(double) * static_cast<std::size_t>(m.vertices.size()), hash);
    hash = fnv1a64(m.faces.data(), sizeof(int) * static_cast<std::size_t>(m.faces.size()), hash);
    for (const Region& r : dataset.regions[i]) {
      hash = fnv1a64(r.label, hash);
      hash = fnv1a64(r.indices.data(), sizeof(int) * r.indices.size(), hash);
    }
  }
  return hash;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string EncodingRecipe::name(std::size_t regions) const {
  if (!local) return "LBO" + std::to_string(k);
  std::string out = to_string(*local);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  out += std::to_string(k);
  for (std::size_t i = 0; i < regions; ++i) out += "+" + std::to_string(h);
  return out;
}

OperatorPair shape_laplacian(const Mesh& shape, int neighbors) {
  if (shape.num_faces() > 0) return cotan_laplacian(shape);
  return pointcloud_laplacian(shape.vertices, std::min<int>(neighbors, static_cast<int>(shape.num_vertices()) - 1));
}

ShapeSpectra compute_spectra(const Mesh& shape, const std::vector<Region>& regions, const EncodingRecipe& recipe) {
  validate_recipe(recipe);
  if (recipe.local && regions.empty()) throw Error("a local operator needs at least one region");
  const OperatorPair lbo = shape_laplacian(shape, recipe.neighbors);
  const Index n = lbo.dimension();
  int global_count = needs_potential(recipe) ? std::max(recipe.k, kPotentialReferenceCount) : recipe.k;
  global_count = static_cast<int>(std::min<Index>(global_count, n));
  if (global_count < recipe.k) throw Error("shape has fewer vertices than k");

  const bool lmh = recipe.local && *recipe.local == LocalOperator::LMH;
  const Spectrum global = smallest_eigenpairs(lbo, global_count, lmh, recipe.seed);
  ShapeSpectra out;
  out.global = global.eigenvalues;
  if (!recipe.local) return out;

  const double tau =
      recipe.potential_scale * global.eigenvalues.head(std::min(global_count, kPotentialReferenceCount)).mean();
  const Eigen::MatrixXd basis = lmh ? Eigen::MatrixXd(global.eigenvectors.leftCols(recipe.k)) : Eigen::MatrixXd();
  for (const Region& region : regions) {
    const OperatorPair op = local_operator(shape, lbo, region, recipe, tau, basis);
    if (op.dimension() < recipe.h) {
      throw Error("region '" + region.label + "' has only " + std::to_string(op.dimension()) +
                  " interior vertices; h = " + std::to_string(recipe.h));
    }
    out.locals.emplace_back(region.label, smallest_eigenpairs(op, recipe.h, false, recipe.seed).eigenvalues);
  }
  return out;
}

SpectralEncoding encode_spectra(const ShapeSpectra& spectra, int k, int h) {
  if (spectra.global.size() < k) {
    throw Error("spectrum holds " + std::to_string(spectra.global.size()) + " global eigenvalues, need " +
                std::to_string(k));
  }
  std::vector<LabeledSpectrum> locals;
  for (const auto& [label, values] : spectra.locals) {
    if (values.size() < h) throw Error("region '" + label + "' spectrum is shorter than h");
    locals.emplace_back(label, values.head(h));
  }
  return build_encoding(spectra.global.head(k), locals);
}

SpectralEncoding encode_shape(const Mesh& shape, const std::vector<Region>& regions, const EncodingRecipe& recipe) {
  return encode_spectra(compute_spectra(shape, regions, recipe), recipe.k, recipe.h);
}

std::vector<ShapeSpectra> compute_dataset_spectra(const Dataset& dataset, const EncodingRecipe& recipe,
                                                  const ProgressCallback& progress) {
  std::vector<ShapeSpectra> out(dataset.size());
  std::atomic<std::size_t> done{0};
  std::mutex report;
  parallel_for(dataset.size(), [&](std::size_t i) {
    try {
      out[i] = compute_spectra(dataset.shapes[i], dataset.regions[i], recipe);
    } catch (const Error& e) {
      throw Error("shape " + std::to_string(i) + ": " + e.what());
    }
    const std::size_t finished = ++done;
    if (progress) {
      std::lock_guard<std::mutex> lock(report);
      progress(finished, dataset.size());
    }
  });
  return out;
}

std::string spectra_to_json(const std::vector<ShapeSpectra>& spectra, const EncodingRecipe& recipe) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& s : spectra) {
    nlohmann::json locals = nlohmann::json::array();
    for (const auto& [label, values] : s.locals) locals.push_back({{"label", label}, {"values", vector_to_json(values)}});
    items.push_back({{"global", vector_to_json(s.global)}, {"locals", locals}});
  }
  return nlohmann::json{{"recipe", recipe}, {"spectra", items}}.dump();
}

std::vector<ShapeSpectra> spectra_from_json(const std::string& text, EncodingRecipe* recipe) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (recipe) *recipe = j.at("recipe").get<EncodingRecipe>();
    std::vector<ShapeSpectra> out;
    for (const auto& item : j.at("spectra")) {
      ShapeSpectra s;
      s.global = vector_from_json(item.at("global"));
      for (const auto& local : item.at("locals")) {
        s.locals.emplace_back(local.at("label").get<std::string>(), vector_from_json(local.at("values")));
      }
      out.push_back(std::move(s));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("spectra JSON: ") + e.what(), 0);
  }
}

std::vector<ShapeSpectra> cached_dataset_spectra(const Dataset& dataset, const EncodingRecipe& recipe,
                                                 const std::filesystem::path& cache_dir,
                                                 const ProgressCallback& progress) {
  const std::uint64_t key = fnv1a64(nlohmann::json(recipe).dump(), dataset_fingerprint(dataset));
  const auto path = cache_dir / ("spectra_" + recipe.name(dataset.regions.empty() ? 1 : dataset.regions[0].size()) +
                                 "_" + hex(key) + ".json");
  if (std::filesystem::exists(path)) {
    EncodingRecipe stored;
    try {
      auto cached = spectra_from_json(read_text_file(path), &stored);
      if (stored == recipe && cached.size() == dataset.size()) return cached;
    } catch (const Error&) {
      // unreadable cache entries are recomputed
    }
  }
  auto spectra = compute_dataset_spectra(dataset, recipe, progress);
  write_text_file(path, spectra_to_json(spectra, recipe));
  return spectra;
}

int worker_count() {
  if (const char* env = std::getenv("SPECTRAFORGE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_lock;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_lock);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace spectraforge

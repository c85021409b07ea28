// sqseg: command line front end for signal generation, segmentation,
// evaluation and the HTTP service.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "sqseg/image_io.hpp"
#include "sqseg/pipeline.hpp"
#include "sqseg/service.hpp"
#include "sqseg/signal.hpp"
#include "sqseg/tensor_io.hpp"
#include "sqseg/weights.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sqseg;

namespace {

enum Exit { kOk = 0, kIo = 1, kMissingClass = 2, kBadWeights = 3, kDimMismatch = 4 };

struct Failure {
  int code;
  std::string message;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kIo, "cannot open " + path.string()};
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Failure{kIo, path.string() + ": " + e.what()};
  }
}

void write_text(const fs::path& path, const std::string& text) {
  try {
    write_file_bytes(path, text);
  } catch (const std::exception& e) {
    throw Failure{kIo, e.what()};
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kIo, "cannot create " + dir.string() + ": " + ec.message()};
}

LoadedModel load_model(const std::string& path) {
  std::string p = path;
  if (p.empty())
    if (const char* env = std::getenv("SQSEG_WEIGHTS")) p = env;
  if (p.empty()) throw Failure{kBadWeights, "no weights given (use --weights or SQSEG_WEIGHTS)"};
  try {
    return load_weights(p);
  } catch (const WeightsError& e) {
    throw Failure{e.code() == WeightsErrorCode::Io ? kIo : kBadWeights, e.what()};
  }
}

std::shared_ptr<const SegmentationModel> make_model(LoadedModel model, int threads) {
  auto net = std::make_shared<const EfficientUNet>(
      model.spec, std::make_shared<const Weights>(std::move(model.weights)));
  return std::make_shared<NetworkModel>(net, model.spec.name, threads);
}

// gensig -------------------------------------------------------------------

struct GensigArgs {
  std::string gt, params, out;
  int class_id = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

json gensig_one(const LabelMask& labels, int class_id, const GenParams& params, const fs::path& out,
                const std::string& prefix) {
  const TrainingPair pair = make_training_pair(labels, class_id, params);
  write_text(out / (prefix + "inclusion.png"), encode_mask_png(pair.signals.inclusion));
  write_text(out / (prefix + "exclusion.png"), encode_mask_png(pair.signals.exclusion));
  json stages = json::object();
  for (const auto& [id, s] : pair.stages) stages[std::to_string(id)] = s;
  const json provenance{{"seed", params.seed}, {"class_id", class_id}, {"params", params}, {"stages", stages}};
  write_text(out / (prefix + "provenance.json"), provenance.dump(2) + "\n");
  return provenance;
}

int run_gensig(const GensigArgs& a) {
  GenParams params;
  if (!a.params.empty()) {
    try {
      params = read_json(a.params).get<GenParams>();
    } catch (const std::invalid_argument& e) {
      throw Failure{kIo, std::string("--params: ") + e.what()};
    } catch (const json::exception& e) {
      throw Failure{kIo, std::string("--params: ") + e.what()};
    }
  }
  if (a.seed_set) params.seed = a.seed;
  make_dir(a.out);

  auto load = [](const fs::path& p) {
    try {
      return read_label_png(p);
    } catch (const ImageError& e) {
      throw Failure{kIo, e.what()};
    }
  };

  if (!fs::is_directory(a.gt)) {
    if (a.class_id == 0) throw Failure{kIo, "--class is required for a single label image"};
    const LabelMask labels = load(a.gt);
    try {
      gensig_one(labels, a.class_id, params, a.out, "");
    } catch (const ClassNotPresentError& e) {
      throw Failure{kMissingClass, e.what()};
    }
    return kOk;
  }

  // Batch: every PNG in the directory, one subdirectory per image.
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.gt))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  double total_ms = 0.0;
  for (const auto& f : files) {
    const auto t0 = std::chrono::steady_clock::now();
    const LabelMask labels = load(f);
    const fs::path dir = fs::path(a.out) / f.stem();
    make_dir(dir);
    std::vector<int> classes = a.class_id ? std::vector<int>{a.class_id} : labels.present_classes();
    int done = 0;
    for (int c : classes) {
      if (!labels.has_class(c)) continue;
      gensig_one(labels, c, params, dir, "class" + std::to_string(c) + "_");
      ++done;
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    total_ms += ms;
    std::cerr << json{{"event", "gensig"}, {"image", f.filename().string()}, {"classes", done}, {"ms", ms}}.dump()
              << '\n';
  }
  std::cerr << json{{"event", "gensig_batch"}, {"images", files.size()}, {"total_ms", total_ms}}.dump() << '\n';
  return kOk;
}

// segment ------------------------------------------------------------------

struct SegmentArgs {
  std::string image, squiggles, weights, out, palette, stain;
  bool probs = false;
  int threads = 1;
};

std::vector<Squiggle> read_squiggles(const fs::path& path) {
  const json j = read_json(path);
  const json& list = j.is_object() ? j.at("squiggles") : j;
  try {
    return list.get<std::vector<Squiggle>>();
  } catch (const std::exception& e) {
    throw Failure{kIo, path.string() + ": " + e.what()};
  }
}

Palette palette_from(const std::string& path) {
  if (path.empty()) return default_palette();
  try {
    return load_palette(path);
  } catch (const std::exception& e) {
    throw Failure{kIo, std::string("--palette: ") + e.what()};
  }
}

int run_segment(const SegmentArgs& a) {
  auto model = make_model(load_model(a.weights), a.threads);
  const Palette palette = palette_from(a.palette);
  Tensor rgb;
  try {
    rgb = read_rgb_png(a.image);
  } catch (const ImageError& e) {
    throw Failure{kIo, e.what()};
  }
  const auto squiggles = read_squiggles(a.squiggles);
  for (const auto& s : squiggles)
    if (!palette.valid_class(s.class_id)) throw Failure{kMissingClass, "unknown class id " + std::to_string(s.class_id)};
  SceneOptions opts;
  if (!a.stain.empty()) opts.stain_target = read_json(a.stain).get<StainStats>();
  SceneResult scene{LabelMask(1, 1), {}};
  try {
    scene = segment_scene(rgb, squiggles, *model, palette.num_classes(), opts);
  } catch (const DimensionError& e) {
    throw Failure{kDimMismatch, e.what()};
  }
  make_dir(a.out);
  write_text(fs::path(a.out) / "labels.png", encode_label_png(scene.labels, palette));
  if (a.probs)
    for (const auto& m : scene.probmaps)
      write_text(fs::path(a.out) / ("class" + std::to_string(m.class_id) + ".eutn"),
                 encode_raw_tensor(Tensor({1, static_cast<std::size_t>(m.height), static_cast<std::size_t>(m.width)}, m.probs)));
  return kOk;
}

// eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, probs, out;
};

int run_eval(const EvalArgs& a) {
  LabelMask pred(1, 1), gt(1, 1);
  try {
    pred = read_label_png(a.pred);
    gt = read_label_png(a.gt);
  } catch (const ImageError& e) {
    throw Failure{kIo, e.what()};
  }
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw Failure{kDimMismatch, "prediction and ground truth differ in size"};
  std::vector<ClassProbMap> maps;
  if (!a.probs.empty()) {
    for (int c = 1; c <= gt.num_classes(); ++c) {
      const fs::path p = fs::path(a.probs) / ("class" + std::to_string(c) + ".eutn");
      if (!fs::exists(p)) continue;
      Tensor t;
      try {
        t = read_raw_tensor(p);
      } catch (const std::exception& e) {
        throw Failure{kIo, e.what()};
      }
      if (t.shape() != Shape{1, static_cast<std::size_t>(gt.height()), static_cast<std::size_t>(gt.width())})
        throw Failure{kDimMismatch, p.string() + " has shape " + shape_string(t.shape())};
      maps.push_back({c, gt.width(), gt.height(), std::move(t.storage())});
    }
  }
  const MetricsReport report = evaluate_scene(pred, maps, gt);
  std::map<int, std::string> names;
  const Palette palette = default_palette();
  for (const auto& c : palette.classes()) names[c.id] = c.name;
  const std::string js = json(report).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << js;
  } else {
    make_dir(a.out);
    write_text(fs::path(a.out) / "metrics.json", js);
    write_text(fs::path(a.out) / "metrics.csv", to_csv(report, names));
  }
  return kOk;
}

// serve / inspect / init-weights --------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1", weights, palette, data_dir, stain;
  int port = 8080, workers = 8, max_concurrent = 0, threads = 1;
  std::size_t max_image_bytes = 16u << 20;
};

int run_serve(const ServeArgs& a) {
  ServiceConfig cfg;
  cfg.model = make_model(load_model(a.weights), a.threads);
  cfg.palette = palette_from(a.palette);
  cfg.max_image_bytes = a.max_image_bytes;
  cfg.max_concurrent = a.max_concurrent;
  if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
  if (!a.stain.empty()) cfg.stain_target = read_json(a.stain).get<StainStats>();
  cfg.log = &std::cerr;
  auto service = std::make_shared<SegmentService>(std::move(cfg));
  HttpServer server(service, a.workers);
  const int port = server.bind(a.host, a.port);
  if (port < 0) throw Failure{kIo, "cannot bind " + a.host + ":" + std::to_string(a.port)};
  std::cerr << json{{"event", "listening"}, {"host", a.host}, {"port", port}}.dump() << std::endl;
  return server.listen() ? kOk : kIo;
}

int run_inspect(const std::string& weights, const std::string& variant) {
  NetworkSpec spec;
  if (!variant.empty()) {
    auto v = parse_variant(variant);
    if (!v) throw Failure{kIo, "unknown variant '" + variant + "'"};
    spec = build_efficient_unet(*v);
  } else {
    spec = load_model(weights).spec;
  }
  const auto params = enumerate_parameters(spec);
  std::cout << json{{"name", spec.name},
                    {"width_mult", spec.width_mult},
                    {"depth_mult", spec.depth_mult},
                    {"parameters", count_parameters(spec)},
                    {"tensors", params.size()},
                    {"spec", spec}}
                   .dump(2)
            << '\n';
  return kOk;
}

int run_init(const std::string& variant, std::uint64_t seed, const std::string& out) {
  auto v = parse_variant(variant);
  if (!v) throw Failure{kIo, "unknown variant '" + variant + "'"};
  const NetworkSpec spec = build_efficient_unet(*v);
  try {
    save_weights(init_weights(spec, seed), spec, out);
  } catch (const WeightsError& e) {
    throw Failure{kIo, e.what()};
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Squiggle-guided tissue segmentation tools"};
  app.require_subcommand(1);

  GensigArgs gs;
  auto* gensig = app.add_subcommand("gensig", "Generate inclusion/exclusion maps from a label PNG");
  gensig->add_option("--gt", gs.gt, "Label PNG, or a directory of them for batch mode")->required();
  gensig->add_option("--class", gs.class_id, "Target class id (batch: default all present)");
  gensig->add_option("--seed", gs.seed, "Generator seed (overrides --params)")->each([&](const std::string&) { gs.seed_set = true; });
  gensig->add_option("--params", gs.params, "Generator parameter JSON");
  gensig->add_option("--out", gs.out, "Output directory")->required();

  SegmentArgs sa;
  auto* segment = app.add_subcommand("segment", "Segment an image from squiggles");
  segment->add_option("--image", sa.image, "RGB PNG")->required();
  segment->add_option("--squiggles", sa.squiggles, "Squiggle list or scene descriptor JSON")->required();
  segment->add_option("--weights", sa.weights, "Weight container (default $SQSEG_WEIGHTS)");
  segment->add_option("--out", sa.out, "Output directory")->required();
  segment->add_option("--palette", sa.palette, "Palette JSON");
  segment->add_option("--stain", sa.stain, "Target stain statistics JSON");
  segment->add_option("--threads", sa.threads, "Threads per forward pass");
  segment->add_flag("--probs", sa.probs, "Also write per-class probability tensors");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score a label PNG against ground truth");
  eval->add_option("--pred", ea.pred, "Predicted label PNG")->required();
  eval->add_option("--gt", ea.gt, "Ground truth label PNG")->required();
  eval->add_option("--probs", ea.probs, "Directory of class<id>.eutn probability maps");
  eval->add_option("--out", ea.out, "Output directory (default: JSON to stdout)");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", sv.port, "Port (0 picks a free one)");
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--weights", sv.weights, "Weight container (default $SQSEG_WEIGHTS)");
  serve->add_option("--palette", sv.palette, "Palette JSON");
  serve->add_option("--data-dir", sv.data_dir, "Root for server-side image paths");
  serve->add_option("--stain", sv.stain, "Target stain statistics JSON");
  serve->add_option("--max-image-bytes", sv.max_image_bytes, "Upload cap");
  serve->add_option("--workers", sv.workers, "HTTP worker threads");
  serve->add_option("--max-concurrent", sv.max_concurrent, "Concurrent forward passes (0 = cores)");
  serve->add_option("--threads", sv.threads, "Threads per forward pass");

  std::string iw, ivar;
  auto* inspect = app.add_subcommand("inspect", "Describe a weight container or a built variant");
  inspect->add_option("--weights", iw, "Weight container");
  inspect->add_option("--variant", ivar, "B0..B3");

  std::string init_variant = "B0", init_out;
  std::uint64_t init_seed = 0;
  auto* init = app.add_subcommand("init-weights", "Write deterministic random weights");
  init->add_option("--variant", init_variant, "B0..B3");
  init->add_option("--seed", init_seed, "Seed");
  init->add_option("--out", init_out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gensig) return run_gensig(gs);
    if (*segment) return run_segment(sa);
    if (*eval) return run_eval(ea);
    if (*serve) return run_serve(sv);
    if (*inspect) return run_inspect(iw, ivar);
    if (*init) return run_init(init_variant, init_seed, init_out);
  } catch (const Failure& f) {
    std::cerr << "sqseg: " << f.message << '\n';
    return f.code;
  } catch (const DimensionError& e) {
    std::cerr << "sqseg: " << e.what() << '\n';
    return kDimMismatch;
  } catch (const std::exception& e) {
    std::cerr << "sqseg: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}

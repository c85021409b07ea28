// Acceptance runner: one PASS/FAIL line per criterion.

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "sqseg/image_io.hpp"
#include "sqseg/loss.hpp"
#include "sqseg/morphology.hpp"
#include "sqseg/nn_ops.hpp"
#include "sqseg/rle.hpp"
#include "sqseg/service.hpp"
#include "sqseg/tensor_io.hpp"
#include "sqseg/weights.hpp"
#include "testkit.hpp"

extern char** environ;

namespace fs = std::filesystem;
using namespace sqseg;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Context {
  std::string cli;
  fs::path workdir;
};

// Collects violations; the first few are kept verbatim for the report.
class Checker {
 public:
  void expect(bool ok, const std::function<std::string()>& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (notes_.size() < 5) notes_.push_back(what());
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(checks_ - failures_) + "/" + std::to_string(checks_) + " checks";
    for (const auto& n : notes_) s += "; " + n;
    return s;
  }

 private:
  std::size_t checks_ = 0, failures_ = 0;
  std::vector<std::string> notes_;
};

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream o;
  o.precision(precision);
  o << v;
  return o.str();
}

int run_cli(const Context& ctx, const std::string& args) {
  const std::string cmd = ctx.cli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 1: guiding-signal generator -------------------------------------------------

Outcome criterion1(const Context&) {
  const auto t0 = Clock::now();
  constexpr int kMaps = 500, kSeeds = 20, kSize = 64;
  RngStream map_rng(1001);
  Checker c;
  int fired[4] = {};
  int draws = 0;
  const GenParams defaults;
  for (int m = 0; m < kMaps; ++m) {
    auto gt = testkit::random_label_map(kSize, kSize, 2 + m % 4, map_rng);
    while (gt.present_classes().size() < 2) gt = testkit::random_label_map(kSize, kSize, 2 + m % 4, map_rng);
    const auto present = gt.present_classes();
    std::map<int, BinaryMask> regions;
    std::map<int, std::vector<BinaryMask>> parts;
    for (int k : present) {
      regions.emplace(k, gt.class_mask(k));
      parts.emplace(k, split_components(regions.at(k)));
    }
    for (int s = 0; s < kSeeds; ++s) {
      GenParams params;
      params.seed = static_cast<std::uint64_t>(m) * 1000003u + static_cast<std::uint64_t>(s);
      const int target = present[static_cast<std::size_t>(m + s) % present.size()];
      const auto pair = make_training_pair(gt, target, params);
      const auto& inc = pair.signals.inclusion;
      const auto& exc = pair.signals.exclusion;
      const auto tag = [&] { return "map " + std::to_string(m) + " seed " + std::to_string(s); };
      c.expect(inc.is_subset_of(regions.at(target)), [&] { return tag() + ": inclusion leaves its region"; });
      BinaryMask others(kSize, kSize);
      for (const auto& [k, r] : regions)
        if (k != target) others |= r;
      c.expect(exc.is_subset_of(others), [&] { return tag() + ": exclusion leaves the other classes"; });
      c.expect((inc & exc).empty(), [&] { return tag() + ": inclusion and exclusion overlap"; });
      for (const auto& [k, comps] : parts) {
        const BinaryMask& signal = k == target ? inc : exc;
        for (const auto& comp : comps)
          c.expect(!(comp & signal).empty(), [&] { return tag() + ": uncovered component of class " + std::to_string(k); });
      }
      const auto& st = pair.stages.at(target);
      fired[0] += st.approx;
      fired[1] += st.smooth;
      fired[2] += st.partition;
      fired[3] += st.distthresh;
      ++draws;
    }
  }
  const double want[4] = {defaults.p_approx, defaults.p_smooth, defaults.p_partition, defaults.p_distthresh};
  std::string freq;
  bool freq_ok = draws >= 10000;
  for (int i = 0; i < 4; ++i) {
    const double f = static_cast<double>(fired[i]) / draws;
    freq += (i ? "/" : "") + fmt(f, 4);
    freq_ok = freq_ok && std::abs(f - want[i]) <= 0.02;
  }
  const double secs = seconds_since(t0);
  const bool pass = c.ok() && freq_ok && secs <= 120.0;
  return {pass, std::to_string(draws) + " draws, " + c.summary() + ", stage frequencies " + freq +
                    " (target 0.75/0.75/0.5/0.5 +-0.02), " + fmt(secs) + " s (limit 120 s)"};
}

// 2: geometry oracles -------------------------------------------------------

Outcome criterion2(const Context&) {
  RngStream rng(2002);
  Checker dp, edt, skel;
  for (int i = 0; i < 1000; ++i) {
    const bool closed = i % 2 == 1;
    const auto p = testkit::random_polyline(static_cast<int>(rng.uniform_int(3, 80)), rng, closed);
    const double eps = rng.uniform(0.0, 8.0);
    const auto s = approximate_polygon(p, eps);
    const auto dev = testkit::max_removed_deviation(p, s);
    dp.expect(dev.has_value() && *dev <= eps, [&] { return "polyline " + std::to_string(i); });
  }
  for (int i = 0; i < 400; ++i) {
    const int w = static_cast<int>(rng.uniform_int(1, 32)), h = static_cast<int>(rng.uniform_int(1, 32));
    const auto m = i % 2 ? testkit::random_noise_mask(w, h, rng.uniform(0.3, 1.0), rng) : testkit::random_blob(w, h, rng);
    const auto got = distance_transform(m).values();
    const auto want = testkit::brute_distance(m);
    double worst = 0;
    for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
    edt.expect(worst <= 1e-9, [&] { return "mask " + std::to_string(i) + " error " + fmt(worst); });
  }
  for (int i = 0; i < 200; ++i) {
    const auto m = testkit::random_blob(48, 48, rng);
    const auto s = skeletonize(m);
    skel.expect(s.is_subset_of(m), [&] { return "blob " + std::to_string(i) + " not a subset"; });
    skel.expect(testkit::count_components(s, true) == testkit::count_components(m, true),
                [&] { return "blob " + std::to_string(i) + " component count changed"; });
    bool thin = true;
    for (int y = 0; y < s.height(); ++y)
      for (int x = 0; x < s.width(); ++x) thin = thin && !(s.at(x, y) && testkit::fully_surrounded(s, x, y));
    skel.expect(thin, [&] { return "blob " + std::to_string(i) + " not thin"; });
  }
  return {dp.ok() && edt.ok() && skel.ok(),
          "Douglas-Peucker " + dp.summary() + "; distance transform " + edt.summary() + "; skeleton " + skel.summary()};
}

// 3: loss ------------------------------------------------------------------

Outcome criterion3(const Context&) {
  RngStream rng(3003);
  double worst_value = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 256));
    std::vector<double> p(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = rng.uniform();
      g[k] = rng.bernoulli(0.4);
    }
    worst_value = std::max(worst_value, std::abs(hybrid_loss(p, g) - testkit::scalar_loss(p, g)));
  }
  const double h = 1e-4;
  double worst_grad = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> p(64), g(64);
    for (std::size_t k = 0; k < 64; ++k) {
      // Central differences lose accuracy as h / p grows, so p stays away from 0.
      p[k] = rng.uniform(0.01, 0.99);
      g[k] = rng.bernoulli(0.5);
    }
    const auto grad = hybrid_loss_grad(p, g);
    for (std::size_t k = 0; k < 64; ++k) {
      auto up = p, dn = p;
      up[k] += h;
      dn[k] -= h;
      const double fd = (hybrid_loss(up, g) - hybrid_loss(dn, g)) / (2 * h);
      worst_grad = std::max(worst_grad, std::abs(grad[k] - fd) / std::max(std::abs(fd), 1e-8));
    }
  }
  double worst_zero = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> g(static_cast<std::size_t>(rng.uniform_int(1, 100)));
    for (auto& v : g) v = rng.bernoulli(0.5);
    worst_zero = std::max(worst_zero, std::abs(hybrid_loss(g, g)));
  }
  const bool pass = worst_value <= 1e-9 && worst_grad < 1e-4 && worst_zero <= 1e-12;
  return {pass, "max |L - oracle| " + fmt(worst_value) + " over 1000 instances (tol 1e-9); max gradient relative error " +
                    fmt(worst_grad) + " over 100 8x8 tensors (tol 1e-4); max |L(g, g)| " + fmt(worst_zero)};
}

// 4: network ---------------------------------------------------------------

Weights identity_weights(const std::vector<ParamDecl>& decls) {
  Weights w;
  for (const auto& d : decls) {
    Tensor t(d.shape);
    if (d.role == ParamRole::BnGamma || d.role == ParamRole::BnVar)
      for (float& v : t.values()) v = 1.0f;
    w.add(d.name, std::move(t));
  }
  return w;
}

Outcome criterion4(const Context&) {
  RngStream rng(4004);
  Checker c;
  std::map<Variant, EfficientUNet> nets;
  std::uint64_t prev = 0;
  std::string counts;
  for (auto v : {Variant::B0, Variant::B1, Variant::B2, Variant::B3}) {
    NetworkSpec spec;
    try {
      spec = build_efficient_unet(v);
      nets.emplace(v, EfficientUNet(spec, std::make_shared<const Weights>(init_weights(spec, 40))));
    } catch (const std::exception& e) {
      c.expect(false, [&] { return to_string(v) + std::string(" failed to build: ") + e.what(); });
      continue;
    }
    const auto f = scaling_for(v);
    const auto n = count_parameters(spec);
    c.expect(n == testkit::symbolic_parameter_count(f.width, f.depth),
             [&] { return std::string(to_string(v)) + " parameter count differs from the symbolic count"; });
    c.expect(n > prev, [&] { return std::string(to_string(v)) + " parameter count not increasing"; });
    prev = n;
    counts += std::string(counts.empty() ? "" : " < ") + to_string(v) + "=" + std::to_string(n);
  }
  if (nets.size() != 4) return {false, c.summary()};

  // Shape preservation: B0 over every square size, all variants on small non-square inputs.
  for (int s = 32; s <= 512; s += 32) {
    const auto us = static_cast<std::size_t>(s);
    const auto out = nets.at(Variant::B0).forward(testkit::random_tensor({5, us, us}, rng, 0, 1));
    c.expect(out.shape() == Shape{1, us, us}, [&] { return "B0 shape at " + std::to_string(s); });
  }
  for (auto& [v, net] : nets)
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{32, 96}, {96, 64}}) {
      const auto out = net.forward(testkit::random_tensor({5, h, w}, rng, 0, 1));
      c.expect(out.shape() == Shape{1, h, w}, [&] { return std::string(to_string(v)) + " non-square shape"; });
    }

  // Zeroed residual branches are the identity.
  for (int k : {3, 5}) {
    StageSpec m;
    m.kind = StageKind::MIRSE;
    m.kernel = k;
    m.filters = 24;
    m.repeats = 3;
    m.expand_ratio = 6;
    const auto x = testkit::random_tensor({24, 16, 16}, rng);
    c.expect(mirse_forward(x, m, identity_weights(block_parameters(m, 24, "m")), "m") == x,
             [&] { return "zeroed MIRSE K" + std::to_string(k) + " is not the identity"; });
  }
  const std::vector<std::pair<std::vector<int>, std::vector<int>>> rms_cfgs = {
      {{3, 3, 5, 5}, {1, 3, 3, 5}}, {{3, 5, 5, 7}, {3, 3, 5, 7}}};
  for (const auto& [ks, ds] : rms_cfgs) {
    StageSpec r;
    r.kind = StageKind::RMS;
    r.rms_kernels = ks;
    r.rms_dilations = ds;
    r.filters = 16;
    const auto x = testkit::random_tensor({16, 20, 20}, rng);
    c.expect(rms_forward(x, r, identity_weights(block_parameters(r, 16, "r")), "r") == x,
             [&] { return std::string("zeroed RMS is not the identity"); });
  }

  // Convolutions against naive loops.
  double worst_conv = 0, worst_tconv = 0;
  for (int i = 0; i < 60; ++i) {
    const int groups_kind = i % 3;
    const int cin = static_cast<int>(rng.uniform_int(1, 8)) * (groups_kind == 2 ? 1 : 2);
    const int groups = groups_kind == 0 ? 1 : groups_kind == 1 ? 2 : cin;
    const int cout = groups * static_cast<int>(rng.uniform_int(1, 3));
    const int k = 2 * static_cast<int>(rng.uniform_int(0, 3)) + 1;
    const int stride = static_cast<int>(rng.uniform_int(1, 2)), dil = stride == 1 ? static_cast<int>(rng.uniform_int(1, 7)) : 1;
    const auto h = static_cast<std::size_t>(rng.uniform_int(4, 20)), w = static_cast<std::size_t>(rng.uniform_int(4, 20));
    const auto in = testkit::random_tensor({static_cast<std::size_t>(cin), h, w}, rng);
    // Kernels at the initializer's fan-in scale keep outputs O(1), as inside the network.
    const float bound = std::sqrt(6.0f / static_cast<float>(cin / groups * k * k));
    const auto ker = testkit::random_tensor({static_cast<std::size_t>(cout), static_cast<std::size_t>(cin / groups),
                                             static_cast<std::size_t>(k), static_cast<std::size_t>(k)}, rng, -bound, bound);
    const auto bt = testkit::random_tensor({static_cast<std::size_t>(cout)}, rng);
    const std::vector<float> bias(bt.values().begin(), bt.values().end());
    const auto got = conv2d(in, ker, {stride, dil, groups}, bias, 1 + i % 4);
    const auto want = testkit::naive_conv(in, ker, stride, dil, groups, bias);
    for (std::size_t j = 0; j < got.size(); ++j) worst_conv = std::max(worst_conv, static_cast<double>(std::abs(got[j] - want[j])));

    const auto tin = testkit::random_tensor({static_cast<std::size_t>(cin), h / 2, w / 2}, rng);
    const float tbound = std::sqrt(6.0f / static_cast<float>(cout * 9));
    const auto tk = testkit::random_tensor({static_cast<std::size_t>(cin), static_cast<std::size_t>(cout), 3, 3}, rng, -tbound, tbound);
    const auto tgot = transposed_conv2d(tin, tk, bias, 1 + i % 4);
    const auto twant = testkit::naive_transposed_conv(tin, tk, bias);
    for (std::size_t j = 0; j < tgot.size(); ++j)
      worst_tconv = std::max(worst_tconv, static_cast<double>(std::abs(tgot[j] - twant[j])));
  }
  c.expect(worst_conv <= 1e-5, [&] { return "conv error " + fmt(worst_conv); });
  c.expect(worst_tconv <= 1e-5, [&] { return "transposed conv error " + fmt(worst_tconv); });

  // Thread-count independence.
  const auto in = testkit::random_tensor({5, 128, 128}, rng, 0, 1);
  for (auto& [v, net] : nets) {
    const auto a = net.forward(in, 1), b = net.forward(in, 4);
    c.expect(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0,
             [&] { return std::string(to_string(v)) + " differs between 1 and 4 threads"; });
  }
  return {c.ok(), c.summary() + "; parameters " + counts + "; conv max error " + fmt(worst_conv) +
                      ", transposed conv max error " + fmt(worst_tconv)};
}

// 5: performance -----------------------------------------------------------

Outcome criterion5(const Context&) {
  const auto spec = build_efficient_unet(Variant::B0);
  EfficientUNet net(spec, std::make_shared<const Weights>(init_weights(spec, 50)));
  RngStream rng(5005);
  const auto in = testkit::random_tensor({5, 512, 512}, rng, 0, 1);
  auto time_forward = [&](int threads) {
    const auto t0 = Clock::now();
    const auto out = net.forward(in, threads);
    const double s = seconds_since(t0);
    if (out.shape() != Shape{1, 512, 512}) throw std::runtime_error("unexpected output shape");
    return s;
  };
  const double t1 = time_forward(1);
  const double t4 = time_forward(4);
  const double speedup = t1 / t4;
  const unsigned cores = std::thread::hardware_concurrency();
  const bool pass = t1 <= 120.0 && speedup >= 2.0;
  return {pass, "B0 (5, 512, 512) forward " + fmt(t1) + " s on 1 thread (limit 120 s), " + fmt(t4) +
                    " s on 4 threads, speedup " + fmt(speedup) + "x (need 2x); " + std::to_string(cores) +
                    " hardware thread(s) available"};
}

// 6: end-to-end ------------------------------------------------------------

struct ServerProcess {
  pid_t pid = -1;
  int port = -1;
  ~ServerProcess() {
    if (pid > 0) {
      kill(pid, SIGTERM);
      waitpid(pid, nullptr, 0);
    }
  }
};

void start_server(const Context& ctx, const fs::path& weights, ServerProcess& server) {
  const fs::path log = ctx.workdir / "serve.log";
  fs::remove(log);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 2, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&actions, 1, "/dev/null", O_WRONLY, 0);
  std::vector<std::string> args{ctx.cli, "serve", "--port", "0", "--weights", weights.string(), "--max-concurrent", "1"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  const int rc = posix_spawn(&server.pid, ctx.cli.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw std::runtime_error("cannot start the service");
  for (int i = 0; i < 600 && server.port < 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) {
      const auto j = json::parse(line, nullptr, false);
      if (j.is_object() && j.value("event", "") == "listening") server.port = j["port"].get<int>();
    }
  }
  if (server.port < 0) throw std::runtime_error("service did not report a port");
}

Outcome criterion6(const Context& ctx) {
  Checker c;
  RngStream rng(6006);
  // Generated signals through segment_one and assembly.
  for (int scene = 0; scene < 50; ++scene) {
    const auto gt = testkit::random_label_map(128, 96, 5, rng);
    const auto rgb = testkit::random_rgb(128, 96, rng);
    const testkit::PerfectStub stub(gt);
    GenParams params;
    params.seed = static_cast<std::uint64_t>(scene) + 77;
    std::vector<ClassProbMap> maps;
    for (int k : gt.present_classes())
      maps.push_back(segment_one(rgb, make_training_pair(gt, k, params).signals, stub, k));
    c.expect(assemble_semantic_map(maps, 128, 96) == gt, [&] { return "generated-signal scene " + std::to_string(scene); });
  }
  // Squiggles at each component's deepest pixel, through the full scene path.
  for (int scene = 0; scene < 50; ++scene) {
    const int w = static_cast<int>(rng.uniform_int(40, 160)), h = static_cast<int>(rng.uniform_int(40, 160));
    const auto gt = testkit::random_label_map(w, h, 5, rng);
    const auto rgb = testkit::random_rgb(w, h, rng);
    std::vector<Squiggle> squiggles;
    for (int k : gt.present_classes())
      for (const auto& comp : split_components(gt.class_mask(k))) {
        const auto p = distance_argmax(distance_transform(comp), comp);
        squiggles.push_back({{{static_cast<double>(p.x), static_cast<double>(p.y)}}, k, 0.5});
      }
    const testkit::PerfectStub stub(gt);
    c.expect(segment_scene(rgb, squiggles, stub).labels == gt, [&] { return "squiggle scene " + std::to_string(scene); });
  }

  // CLI and HTTP service on the same 512x512 scene and weights.
  fs::create_directories(ctx.workdir);
  const fs::path weights = ctx.workdir / "c6_b0.eunw";
  if (run_cli(ctx, "init-weights --variant B0 --seed 6 --out " + weights.string()) != 0)
    return {false, "init-weights failed"};
  const auto png = encode_rgb_png(testkit::random_rgb(512, 512, rng));
  write_file_bytes(ctx.workdir / "c6_scene.png", png);
  const json squiggles = json::array({{{"class_id", 1}, {"points", {{40, 60}, {200, 220}, {260, 120}}}, {"radius", 4}},
                                      {{"class_id", 4}, {"points", {{400, 400}, {470, 300}}}, {"radius", 3}}});
  write_file_bytes(ctx.workdir / "c6_squiggles.json", squiggles.dump());
  const fs::path out = ctx.workdir / "c6_cli";
  const int rc = run_cli(ctx, "segment --image " + (ctx.workdir / "c6_scene.png").string() + " --squiggles " +
                                  (ctx.workdir / "c6_squiggles.json").string() + " --weights " + weights.string() +
                                  " --probs --out " + out.string());
  if (rc != 0) return {false, "CLI segment exited with " + std::to_string(rc)};

  ServerProcess server;
  start_server(ctx, weights, server);
  httplib::Client client("127.0.0.1", server.port);
  client.set_read_timeout(600, 0);
  const json req{{"image", "data:image/png;base64," + base64_encode(png)}, {"squiggles", squiggles}, {"return_probs", true}};
  const auto res = client.Post("/api/segment", req.dump(), "application/json");
  if (!res || res->status != 200) return {false, "service request failed"};
  const auto body = json::parse(res->body);
  const auto labels = rle_from_json(body["label_mask"]);
  const bool same_png = encode_label_png(labels, default_palette()) == read_file_bytes(out / "labels.png");
  c.expect(same_png, [] { return std::string("service labels differ from the CLI label PNG"); });
  for (const char* id : {"1", "4"}) {
    const auto served = base64_decode(body["per_class"][id]["tensor"].get<std::string>());
    c.expect(served == read_file_bytes(out / ("class" + std::string(id) + ".eutn")),
             [&] { return std::string("probability tensor for class ") + id + " differs"; });
  }
  return {c.ok(), c.summary() + " (50 generated-signal scenes, 50 squiggle scenes, CLI vs service on 512x512)"};
}

// 7: formats ---------------------------------------------------------------

Outcome criterion7(const Context& ctx) {
  Checker c;
  RngStream rng(7007);
  for (auto v : {Variant::B0, Variant::B1, Variant::B2, Variant::B3}) {
    const auto spec = build_efficient_unet(v);
    auto w = init_weights(spec, 70);
    // Awkward bit patterns must survive too.
    auto& t = w.get_mutable("encoder.0.bn.beta");
    t[0] = -0.0f;
    t[1] = std::numeric_limits<float>::denorm_min();
    t[2] = std::numeric_limits<float>::infinity();
    t[3] = std::numeric_limits<float>::quiet_NaN();
    const auto bytes = serialize_weights(w, spec);
    const auto back = parse_weights(bytes);
    bool bits = back.weights.size() == w.size() && back.spec == spec;
    for (std::size_t i = 0; bits && i < w.size(); ++i) {
      const auto& a = w.entries()[i].tensor;
      const auto& b = back.weights.entries()[i].tensor;
      bits = a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
    }
    c.expect(bits, [&] { return std::string(to_string(v)) + " weights not bit-exact"; });
    c.expect(serialize_weights(back.weights, back.spec) == bytes, [&] { return std::string(to_string(v)) + " re-serialization differs"; });
  }
  for (int i = 0; i < 200; ++i) {
    Shape s(static_cast<std::size_t>(rng.uniform_int(0, 4)));
    for (auto& d : s) d = static_cast<std::size_t>(rng.uniform_int(1, 9));
    Tensor t(s);
    for (float& v : t.values()) v = std::bit_cast<float>(static_cast<std::uint32_t>(rng.next_u64()));
    const auto back = decode_raw_tensor(encode_raw_tensor(t));
    c.expect(back.shape() == t.shape() && std::memcmp(back.data(), t.data(), t.size() * sizeof(float)) == 0,
             [&] { return "raw tensor " + std::to_string(i) + " not bit-exact"; });
  }

  const auto spec = build_efficient_unet(Variant::B0);
  const auto good = serialize_weights(init_weights(spec, 71), spec);
  const auto a = good.find('\n') + 1, b = good.find('\n', a);
  const auto manifest = json::parse(good.substr(a, b - a));
  auto with = [&](const json& m) { return good.substr(0, a) + m.dump() + good.substr(b); };
  auto code = [](const std::string& bytes) -> std::optional<WeightsErrorCode> {
    try {
      parse_weights(bytes);
    } catch (const WeightsError& e) {
      return e.code();
    }
    return std::nullopt;
  };
  std::vector<std::pair<std::string, WeightsErrorCode>> cases;
  cases.push_back({"X" + good.substr(1), WeightsErrorCode::BadMagic});
  cases.push_back({good.substr(0, a) + "{oops" + good.substr(b), WeightsErrorCode::MalformedManifest});
  cases.push_back({good.substr(0, good.size() - 10), WeightsErrorCode::TruncatedBlob});
  {
    auto m = manifest;
    auto shape = m["entries"][0]["shape"].get<Shape>();
    std::swap(shape[0], shape[1]);
    m["entries"][0]["shape"] = shape;
    cases.push_back({with(m), WeightsErrorCode::ShapeMismatch});
  }
  {
    auto m = manifest;
    const auto last = m["entries"].back()["bytes"].get<std::size_t>();
    m["entries"].erase(m["entries"].size() - 1);
    m["blob_bytes"] = m["blob_bytes"].get<std::size_t>() - last;
    const auto s = with(m);
    cases.push_back({s.substr(0, s.size() - last), WeightsErrorCode::MissingEntry});
  }
  {
    auto m = manifest;
    const auto end = m["blob_bytes"].get<std::size_t>();
    m["entries"].push_back({{"name", "extra.weight"}, {"shape", {1}}, {"offset", end}, {"bytes", 4}});
    m["blob_bytes"] = end + 4;
    cases.push_back({with(m) + std::string(4, '\0'), WeightsErrorCode::UnexpectedEntry});
  }
  std::set<WeightsErrorCode> distinct;
  for (const auto& [bytes, want] : cases) {
    const auto got = code(bytes);
    c.expect(got == want, [&, want = want] {
      return std::string("expected ") + to_string(want) + ", got " + (got ? to_string(*got) : "success");
    });
    if (got) distinct.insert(*got);
  }
  c.expect(distinct.size() == cases.size(), [] { return std::string("error codes are not distinct"); });

  const auto raw = encode_raw_tensor(Tensor({2, 3}, 1.0f));
  for (const std::string& bad : {std::string("EUT"), "NOPE" + raw.substr(4), raw.substr(0, raw.size() - 1), raw + "!"}) {
    bool threw = false;
    try {
      decode_raw_tensor(bad);
    } catch (const TensorFormatError&) {
      threw = true;
    }
    c.expect(threw, [] { return std::string("corrupt raw tensor accepted"); });
  }

  // The CLI maps container errors to exit code 3.
  fs::create_directories(ctx.workdir);
  const fs::path corrupt = ctx.workdir / "c7_corrupt.eunw";
  write_file_bytes(corrupt, cases.front().first);
  c.expect(run_cli(ctx, "inspect --weights " + corrupt.string()) == 3, [] { return std::string("CLI exit code for bad magic is not 3"); });
  return {c.ok(), c.summary() + " (B0-B3 containers, 200 raw tensors, " + std::to_string(cases.size()) +
                      " corruption classes)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  int criterion = 0;
  Context ctx;
  std::string workdir = "acceptance_work";
  app.add_option("--criterion", criterion, "1..7, or 0 for all")->check(CLI::Range(0, 7));
  app.add_option("--cli", ctx.cli, "Path to the sqseg executable")->required();
  app.add_option("--workdir", workdir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  ctx.workdir = workdir;

  const std::function<Outcome(const Context&)> table[] = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7};
  bool all = true;
  for (int n = 1; n <= 7; ++n) {
    if (criterion != 0 && criterion != n) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = table[n - 1](ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << " [" << fmt(seconds_since(t0))
              << " s]" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}

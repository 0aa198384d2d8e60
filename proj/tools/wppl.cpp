// wppl: command-line front end for the whole pipeline.
//
// Exit codes: 0 success, 1 user error, 2 numerical failure.
// Every command that writes a directory also writes manifest.json there.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wbi/conjugate.hpp"
#include "wbi/diagnostics.hpp"
#include "wbi/error.hpp"
#include "wbi/io.hpp"
#include "wbi/lang.hpp"
#include "wbi/meta.hpp"
#include "wbi/progen.hpp"
#include "wbi/samplers.hpp"
#include "wbi/semantics.hpp"
#include "wbi/typeck.hpp"
#include "wbi/whitebox.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wbi;

namespace {

constexpr const char* kVersion = "0.3.0";

struct Common {
  bool deterministic = false;
  std::size_t threads = 0;  // 0: WPPL_THREADS or 1

  std::size_t workers() const {
    if (deterministic) return 1;
    std::size_t cap = 0;
    if (const char* env = std::getenv("WPPL_THREADS")) cap = std::strtoul(env, nullptr, 10);
    std::size_t t = threads ? threads : (cap ? cap : 1);
    if (cap) t = std::min(t, cap);
    return std::max<std::size_t>(t, 1);
  }
};

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Timer {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Collects what a run read and how long it took, then writes manifest.json.
struct Manifest {
  std::string command;
  json config = json::object();
  json seeds = json::array();
  json inputs = json::object();  // path -> content hash
  json timings = json::object();

  void input(const std::string& path) { inputs[path] = hex64(fnv1a(read_file(path))); }

  void write(const fs::path& dir, const Common& c) const {
    json j;
    j["command"] = command;
    j["tool_version"] = kVersion;
    j["deterministic"] = c.deterministic;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    json t = timings;
    if (c.deterministic)
      for (auto& [k, v] : t.items()) v = 0.0;
    j["timings_ms"] = t;
    write_file((dir / "manifest.json").string(), j.dump(2) + "\n");
  }
};

Program load_program(const std::string& path) { return parse(read_file(path)); }

std::vector<fs::path> program_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wppl") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no .wppl files in " + dir);
  return out;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("cannot create " + p.string() + ": " + ec.message());
}

std::vector<double> parse_reals(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw Error("not a number: '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos)
      throw Error("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string real(double x) { return format_real(x); }

// ---------------------------------------------------------------------------
// Corpus loading shared by train, eval and bench.

std::vector<CorpusEntry> load_entries(const std::string& prog_dir, const std::string& cache_dir,
                                      bool need_cache, Manifest& man) {
  std::vector<CorpusEntry> out;
  for (const fs::path& p : program_files(prog_dir)) {
    CorpusEntry e;
    e.label = p.stem().string();
    e.program = load_program(p.string());
    man.input(p.string());
    const fs::path cp = fs::path(cache_dir.empty() ? prog_dir : cache_dir) / (e.label + ".cache");
    if (fs::exists(cp)) {
      SampleCache c = read_cache(cp.string());
      if (c.program_hash != program_hash(e.program))
        throw FormatError(cp.string() + " was built for a different program");
      e.cache = std::move(c.set);
      man.input(cp.string());
    } else if (need_cache) {
      throw Error("missing reference cache " + cp.string());
    }
    if (e.cache.size() == 0 && !linear_gaussian(e.program))
      throw Error("no reference for " + p.string() + " (needs " + cp.string() + ")");
    set_reference(e);
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen(const std::string& cls, const std::vector<int>& types, std::size_t count,
            std::uint64_t seed, const std::string& out, const Common& c) {
  std::vector<ClassSpec> specs;
  if (types.empty()) {
    specs = class_specs(cls);
  } else {
    for (int t : types) specs.push_back(class_spec(cls, t));
  }
  Timer timer;
  GeneratedCorpus corpus = generate_corpus(specs, {}, count, 0, seed);
  ensure_dir(out);
  Manifest man;
  man.command = "gen";
  man.config = {{"class", cls}, {"types", types}, {"count", count}};
  man.seeds.push_back(seed);
  json programs = json::array();
  int width = std::max<int>(3, static_cast<int>(std::to_string(count).size()));
  for (std::size_t i = 0; i < corpus.train.size(); ++i) {
    const GeneratedProgram& g = corpus.train[i];
    std::string idx = std::to_string(i);
    idx.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(idx.size()))), '0');
    const std::string file = idx + ".wppl";
    write_file((fs::path(out) / file).string(), print(g.program));
    programs.push_back({{"file", file},
                        {"class", g.class_label},
                        {"type", g.type},
                        {"seed", g.seed},
                        {"theta", g.theta},
                        {"debug_latents", g.latents}});
  }
  man.config["programs"] = programs;
  man.timings["total"] = timer.ms();
  man.write(out, c);
  return 0;
}

int cmd_check(const std::string& file) {
  Program p = parse_syntax(read_file(file));
  TypingState st = check_program(p);
  std::vector<std::string> latents, assigned;
  for (VarId v : st.latents) latents.push_back(p.name(v));
  for (VarId v : st.assigned) assigned.push_back(p.name(v));
  std::sort(assigned.begin(), assigned.end());
  auto join = [](const std::vector<std::string>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + xs[i];
    return s;
  };
  std::vector<std::string> alpha;
  for (double r : st.observations) alpha.push_back(real(r));
  std::cout << "S = [" << join(latents) << "]\n";
  std::cout << "V = {" << join(assigned) << "}\n";
  std::cout << "alpha = [" << join(alpha) << "]\n";
  for (std::size_t idx : lint_nonpositive_variances(p))
    std::cerr << "warning: command " << idx << " has a non-positive constant variance\n";
  return 0;
}

int cmd_density(const std::string& file, const std::string& zcsv) {
  Program p = load_program(file);
  std::vector<double> z = parse_reals(zcsv);
  if (z.size() != p.latent_count())
    throw Error("expected " + std::to_string(p.latent_count()) + " latent values, got " +
                std::to_string(z.size()));
  double ld = log_density(p, z);
  std::cout << real(ld) << "\n";
  return std::isnan(ld) ? 2 : 0;
}

int cmd_simulate(const std::string& file, std::uint64_t seed, std::size_t count) {
  Program p = load_program(file);
  Rng rng = derive_rng(seed, {stage::generate});
  std::string header;
  for (VarId v : p.latent_order) header += (header.empty() ? "" : ",") + p.name(v);
  for (std::size_t k = 0; k < p.observe_count(); ++k)
    header += (header.empty() ? "obs" : ",obs") + std::to_string(k + 1);
  std::cout << header << "\n";
  for (std::size_t r = 0; r < count; ++r) {
    Simulation s = simulate(p, rng);
    std::string row;
    for (double x : s.latents) row += (row.empty() ? "" : ",") + real(x);
    for (double x : s.observations) row += (row.empty() ? "" : ",") + real(x);
    std::cout << row << "\n";
  }
  return 0;
}

MeanFieldPosterior read_proposal(const std::string& path, const Program& p) {
  json j = json::parse(read_file(path));
  if (j.value("format", "") != "wbi-proposal") throw FormatError(path + " is not a proposal file");
  if (j.at("program_hash").get<std::string>() != hex64(program_hash(p)))
    throw FormatError(path + " was emitted for a different program");
  auto mean = j.at("mean").get<std::vector<double>>();
  auto var = j.at("variance").get<std::vector<double>>();
  if (mean.size() != p.latent_count() || var.size() != mean.size())
    throw ShapeError("proposal dimension does not match program");
  MeanFieldPosterior q;
  q.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  q.variance = Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size()));
  return q;
}

struct RefsampleOpts {
  std::string method = "snis";
  std::size_t samples = 4096;
  std::uint64_t seed = 0;
  std::size_t warmup = 1000;
  std::size_t chains = 1;
  std::size_t leapfrog = 32;
  std::size_t lais_samples = 4096;
  std::string proposal;
};

WeightedSampleSet refsample_one(const Program& p, const RefsampleOpts& o, std::size_t threads) {
  if (o.method == "is_pred") {
    if (o.proposal.empty()) throw Error("--method is_pred needs --proposal");
    return snis_proposal(p, read_proposal(o.proposal, p), o.samples, o.seed);
  }
  ReferenceConfig rc;
  rc.samples = o.samples;
  rc.seed = o.seed;
  rc.lais_samples = o.lais_samples;
  rc.hmc.warmup = o.warmup;
  rc.hmc.chains = o.chains;
  rc.hmc.leapfrog_steps = o.leapfrog;
  rc.hmc.threads = threads;
  if (o.method == "lais") {
    HmcConfig h = rc.hmc;
    h.seed = o.seed;
    h.samples = (o.samples + h.chains - 1) / h.chains;
    return lais(p, hmc(p, h).pooled(), o.lais_samples, o.seed);
  }
  rc.method = reference_method_from_string(o.method);
  return reference_samples(p, rc);
}

int cmd_refsample(const std::string& input, const RefsampleOpts& o, const std::string& out,
                  const Common& c) {
  Timer timer;
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    files = program_files(input);
  } else {
    files.push_back(input);
  }
  ensure_dir(out);
  Manifest man;
  man.command = "refsample";
  man.config = {{"method", o.method},     {"samples", o.samples}, {"warmup", o.warmup},
                {"chains", o.chains},     {"leapfrog", o.leapfrog},
                {"lais_samples", o.lais_samples}};
  man.seeds.push_back(o.seed);
  if (!o.proposal.empty()) man.input(o.proposal);
  std::vector<Program> progs;
  for (const auto& f : files) {
    progs.push_back(load_program(f.string()));
    man.input(f.string());
  }
  std::vector<WeightedSampleSet> sets(progs.size());
  const std::size_t workers = c.workers();
  parallel_for(progs.size(), workers, [&](std::size_t i) {
    sets[i] = refsample_one(progs[i], o, progs.size() > 1 ? 1 : workers);
  });
  for (std::size_t i = 0; i < files.size(); ++i) {
    write_cache((fs::path(out) / (files[i].stem().string() + ".cache")).string(),
                {program_hash(progs[i]), sets[i]});
    std::cout << files[i].stem().string() << " log_N=" << real(sets[i].log_normaliser)
              << " ess=" << real(ess_log_weights(sets[i].log_weights)) << "\n";
  }
  man.timings["total"] = timer.ms();
  man.write(out, c);
  return 0;
}

struct TrainOpts {
  std::string train_dir, train_caches, test_dir, test_caches;
  std::size_t epochs = 100;
  double lambda = 2.0;
  double lr = 1e-3;
  std::size_t minibatch = 4096;
  std::size_t smoothing = 8;
  std::size_t log_every = 1;
  std::string scaling = "raw";
  bool plateau = false;
  std::size_t checkpoint_every = 0;
};

int train_one(const TrainOpts& o, std::uint64_t seed, const fs::path& out, const Common& c) {
  Timer timer;
  Manifest man;
  man.command = "train";
  man.config = {{"epochs", o.epochs},       {"lambda", o.lambda},      {"lr", o.lr},
                {"minibatch", o.minibatch}, {"smoothing", o.smoothing}, {"log_every", o.log_every},
                {"scaling", o.scaling},     {"plateau_stop", o.plateau}};
  man.seeds.push_back(seed);
  TrainingCorpus corpus;
  corpus.train = load_entries(o.train_dir, o.train_caches, true, man);
  if (!o.test_dir.empty()) corpus.test = load_entries(o.test_dir, o.test_caches, true, man);
  BankDims dims = dims_for(corpus);
  NetworkBank bank =
      NetworkBank::create(dims, seed, ProcedureRegistry::builtin(), scaling_from_string(o.scaling));

  TrainConfig tc;
  tc.lambda = o.lambda;
  tc.adam.lr = o.lr;
  tc.minibatch = o.minibatch;
  tc.epochs = o.epochs;
  tc.smoothing = o.smoothing;
  tc.log_every = o.log_every;
  tc.seed = seed;
  tc.plateau_stop = o.plateau;
  tc.threads = c.workers();
  ensure_dir(out);
  const json meta = {{"seed", seed}, {"epochs", o.epochs}};
  TrainResult res = train(bank, corpus, tc, [&](std::size_t epoch, const NetworkBank& b) {
    if (o.checkpoint_every && epoch % o.checkpoint_every == 0) {
      json m = meta;
      m["epoch"] = epoch;
      save_checkpoint((out / ("checkpoint-" + std::to_string(epoch) + ".wbi")).string(), b, m);
    }
  });
  if (c.deterministic)
    for (auto& r : res.log) r.wall_ms = 0.0;
  write_file((out / "loss.csv").string(), loss_csv(res.log));
  json m = meta;
  m["epoch"] = res.epochs_run;
  save_checkpoint((out / "checkpoint.wbi").string(), bank, m);
  man.config["epochs_run"] = res.epochs_run;
  man.config["stopped_on_plateau"] = res.stopped_on_plateau;
  man.timings["total"] = timer.ms();
  man.write(out, c);
  if (!res.log.empty()) {
    const LossRecord& last = res.log.back();
    std::cout << "seed " << seed << ": epochs " << res.epochs_run << ", train loss "
              << real(last.train_loss);
    if (!corpus.test.empty()) std::cout << ", test loss " << real(last.test_loss);
    std::cout << "\n";
  }
  return 0;
}

int cmd_train(const TrainOpts& o, std::uint64_t seed, const std::vector<std::uint64_t>& seeds,
              const std::string& out, const Common& c) {
  if (seeds.empty()) return train_one(o, seed, out, c);
  for (std::uint64_t s : seeds) train_one(o, s, fs::path(out) / ("seed-" + std::to_string(s)), c);
  return 0;
}

int cmd_infer(const std::string& file, const std::string& params, const std::string& emit) {
  Program p = load_program(file);
  NetworkBank bank = load_checkpoint(params);
  check_compatible(bank, p);
  InferResult r = infer(bank, p);
  json lat = json::array();
  for (std::size_t i = 0; i < p.latent_count(); ++i)
    lat.push_back({{"name", p.name(p.latent_order[i])},
                   {"mean", r.posterior.mean(static_cast<Eigen::Index>(i))},
                   {"variance", r.posterior.variance(static_cast<Eigen::Index>(i))}});
  json j = {{"latents", lat}, {"log_z", r.log_z}, {"z", std::exp(r.log_z)}};
  std::cout << j.dump(2) << "\n";
  if (!emit.empty()) {
    json q = {{"format", "wbi-proposal"},
              {"program_hash", hex64(program_hash(p))},
              {"mean", std::vector<double>(r.posterior.mean.data(),
                                           r.posterior.mean.data() + r.posterior.mean.size())},
              {"variance", std::vector<double>(r.posterior.variance.data(),
                                               r.posterior.variance.data() +
                                                   r.posterior.variance.size())}};
    write_file(emit, q.dump(2) + "\n");
  }
  return 0;
}

int cmd_eval(const std::string& params, const std::string& dir, const std::string& caches,
             const std::string& out, const Common& c) {
  Timer timer;
  Manifest man;
  man.command = "eval";
  man.input(params);
  NetworkBank bank = load_checkpoint(params);
  std::vector<CorpusEntry> entries = load_entries(dir, caches, false, man);
  EvalReport rep = evaluate(bank, entries);
  ensure_dir(out);

  json progs = json::array();
  std::string csv = "program,latent,pred_mean,pred_var,ref_mean,ref_var,mean_error_sd,kl,"
                    "baseline_kl,pred_log_z,ref_log_z,z_rel_error\n";
  for (const ProgramReport& r : rep.programs) {
    progs.push_back({{"program", r.label},       {"pred_mean", r.pred_mean},
                     {"pred_var", r.pred_var},   {"ref_mean", r.ref_mean},
                     {"ref_var", r.ref_var},     {"mean_error_sd", r.mean_error_sd},
                     {"kl", r.kl},               {"baseline_kl", r.baseline_kl},
                     {"pred_log_z", r.pred_log_z}, {"ref_log_z", r.ref_log_z},
                     {"z_rel_error", r.z_rel_error}});
    for (std::size_t i = 0; i < r.pred_mean.size(); ++i)
      csv += r.label + "," + std::to_string(i) + "," + real(r.pred_mean[i]) + "," +
             real(r.pred_var[i]) + "," + real(r.ref_mean[i]) + "," + real(r.ref_var[i]) + "," +
             real(r.mean_error_sd[i]) + "," + real(r.kl) + "," + real(r.baseline_kl) + "," +
             real(r.pred_log_z) + "," + real(r.ref_log_z) + "," + real(r.z_rel_error) + "\n";
  }
  json j = {{"programs", progs},
            {"mean_kl", rep.mean_kl},
            {"median_kl", rep.median_kl},
            {"mean_baseline_kl", rep.mean_baseline_kl},
            {"mean_z_rel_error", rep.mean_z_rel_error},
            {"median_z_rel_error", rep.median_z_rel_error}};
  write_file((fs::path(out) / "report.json").string(), j.dump(2) + "\n");
  write_file((fs::path(out) / "report.csv").string(), csv);
  std::cout << "programs " << rep.programs.size() << ", median KL " << real(rep.median_kl)
            << ", median |Z-N|/N " << real(rep.median_z_rel_error) << "\n";
  man.timings["total"] = timer.ms();
  man.write(out, c);
  return 0;
}

int cmd_ess(const std::string& file) {
  SampleCache c = read_cache(file);
  std::cout << real(ess_log_weights(c.set.log_weights)) << "\n";
  return 0;
}

struct BenchOpts {
  std::string params, dir;
  std::size_t samples = 4096;
  std::uint64_t seed = 0;
  std::size_t warmup = 1000;
  std::size_t leapfrog = 32;
};

struct BenchRow {
  std::string program, method;
  double ess = 0.0, time_ms = 0.0;
  std::size_t scans = 0;
};

int cmd_bench(const BenchOpts& o, const std::string& out, const Common& c) {
  Timer timer;
  Manifest man;
  man.command = "bench";
  man.config = {{"samples", o.samples}, {"warmup", o.warmup}, {"leapfrog", o.leapfrog}};
  man.seeds.push_back(o.seed);
  man.input(o.params);
  NetworkBank bank = load_checkpoint(o.params);
  std::vector<BenchRow> rows;
  for (const fs::path& f : program_files(o.dir)) {
    Program p = load_program(f.string());
    man.input(f.string());
    check_compatible(bank, p);
    const std::string label = f.stem().string();
    const std::uint64_t seed = derive_rng(o.seed, {stage::bench, program_hash(p)})();

    {
      Timer t;
      ScanStats st;
      InferResult r = infer(bank, p, &st);
      WeightedSampleSet ws = snis_proposal(p, r.posterior, o.samples, seed, &st);
      double ms = t.ms();
      rows.push_back({label, "is_pred", ess_log_weights(ws.log_weights), ms, st.scans});
    }
    {
      Timer t;
      ScanStats st;
      WeightedSampleSet ws = snis_prior(p, o.samples, seed, &st);
      double ms = t.ms();
      rows.push_back({label, "is_prior", ess_log_weights(ws.log_weights), ms, st.scans});
    }
    {
      Timer t;
      HmcConfig h;
      h.samples = o.samples;
      h.warmup = o.warmup;
      h.leapfrog_steps = o.leapfrog;
      h.seed = seed;
      HmcResult res = hmc(p, h);
      double ms = t.ms();
      // The weakest coordinate bounds the effective sample size.
      double e = INFINITY;
      for (std::size_t i = 0; i < p.latent_count(); ++i)
        e = std::min(e, ess_chains(res.coordinate(i)));
      rows.push_back({label, "hmc", e, ms, 0});
    }
  }
  if (c.deterministic)
    for (auto& r : rows) r.time_ms = 0.0;

  auto rate = [](const BenchRow& r) { return r.time_ms > 0 ? r.ess / (r.time_ms / 1000.0) : NAN; };
  std::string csv = "program,method,ess,time_ms,ess_per_sec,scans\n";
  for (const auto& r : rows)
    csv += r.program + "," + r.method + "," + real(r.ess) + "," + real(r.time_ms) + "," +
           real(rate(r)) + "," + std::to_string(r.scans) + "\n";
  ensure_dir(out);
  write_file((fs::path(out) / "bench.csv").string(), csv);

  // Geometric means and linearly interpolated quartiles per method.
  std::string summary = "method,stat,ess,time_ms,ess_per_sec\n";
  for (const char* method : {"hmc", "is_pred", "is_prior"}) {
    std::vector<double> ess, ms, eps;
    for (const auto& r : rows) {
      if (r.method != method) continue;
      ess.push_back(r.ess);
      ms.push_back(r.time_ms);
      eps.push_back(rate(r));
    }
    auto gm = [](const std::vector<double>& xs) {
      std::vector<double> pos;
      for (double x : xs)
        if (x > 0 && std::isfinite(x)) pos.push_back(x);
      return pos.size() == xs.size() && !pos.empty() ? geometric_mean(pos) : NAN;
    };
    auto q = [](const std::vector<double>& xs, double p) { return xs.empty() ? NAN : quantile(xs, p); };
    summary += std::string(method) + ",GM," + real(gm(ess)) + "," + real(gm(ms)) + "," +
               real(gm(eps)) + "\n";
    summary += std::string(method) + ",Q1," + real(q(ess, 0.25)) + "," + real(q(ms, 0.25)) + "," +
               real(q(eps, 0.25)) + "\n";
    summary += std::string(method) + ",Q3," + real(q(ess, 0.75)) + "," + real(q(ms, 0.75)) + "," +
               real(q(eps, 0.75)) + "\n";
  }
  write_file((fs::path(out) / "summary.csv").string(), summary);
  std::cout << summary;
  man.timings["total"] = timer.ms();
  man.write(out, c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"white-box inference pipeline for first-order probabilistic programs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common common;
  app.add_flag("--deterministic", common.deterministic,
               "serial execution and zeroed wall-clock fields");
  app.add_option("--threads", common.threads, "worker count (capped by WPPL_THREADS)");

  std::string file, out, params, caches, zcsv, emit;
  std::uint64_t seed = 0;
  std::size_t count = 1;

  auto* gen = app.add_subcommand("gen", "generate programs of one class");
  std::string cls;
  std::vector<int> types;
  gen->add_option("--class", cls, "program class")->required()->check(
      CLI::IsMember(class_names()));
  gen->add_option("--type", types, "class types to cycle through (default: all)");
  gen->add_option("--count", count, "number of programs")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed);
  gen->add_option("--out", out, "output directory")->required();

  auto* check = app.add_subcommand("check", "type-check a program and print (S, V, alpha)");
  check->add_option("file", file)->required();

  auto* density = app.add_subcommand("density", "unnormalised log-density at a point");
  density->add_option("file", file)->required();
  density->add_option("--z", zcsv, "comma-separated latent values")->required();

  auto* sim = app.add_subcommand("simulate", "forward simulation as CSV");
  sim->add_option("file", file)->required();
  sim->add_option("--seed", seed);
  sim->add_option("--count", count)->check(CLI::PositiveNumber);

  auto* ref = app.add_subcommand("refsample", "build reference sample caches");
  RefsampleOpts ro;
  ref->add_option("input", file, "program file or directory")->required();
  ref->add_option("--method", ro.method)
      ->check(CLI::IsMember({"exact", "snis", "hmc", "lais", "is_pred"}));
  ref->add_option("--samples", ro.samples)->check(CLI::PositiveNumber);
  ref->add_option("--seed", ro.seed);
  ref->add_option("--warmup", ro.warmup);
  ref->add_option("--chains", ro.chains)->check(CLI::PositiveNumber);
  ref->add_option("--leapfrog", ro.leapfrog)->check(CLI::PositiveNumber);
  ref->add_option("--lais-samples", ro.lais_samples)->check(CLI::PositiveNumber);
  ref->add_option("--proposal", ro.proposal, "proposal file from infer --emit-proposal");
  ref->add_option("--out", out, "cache directory")->required();

  auto* tr = app.add_subcommand("train", "meta-train a network bank");
  TrainOpts to;
  std::vector<std::uint64_t> seeds;
  tr->add_option("--train", to.train_dir, "training programs")->required();
  tr->add_option("--train-caches", to.train_caches, "defaults to the program directory");
  tr->add_option("--test", to.test_dir, "test programs");
  tr->add_option("--test-caches", to.test_caches, "defaults to the program directory");
  tr->add_option("--epochs", to.epochs)->check(CLI::PositiveNumber);
  tr->add_option("--lambda", to.lambda);
  tr->add_option("--lr", to.lr);
  tr->add_option("--minibatch", to.minibatch)->check(CLI::PositiveNumber);
  tr->add_option("--smoothing", to.smoothing)->check(CLI::PositiveNumber);
  tr->add_option("--log-every", to.log_every)->check(CLI::PositiveNumber);
  tr->add_option("--scaling", to.scaling)->check(CLI::IsMember({"raw", "signed_log"}));
  tr->add_flag("--plateau-stop", to.plateau);
  tr->add_option("--checkpoint-every", to.checkpoint_every);
  tr->add_option("--seed", seed);
  tr->add_option("--seeds", seeds, "run once per seed into <out>/seed-<s>")->delimiter(',');
  tr->add_option("--out", out)->required();

  auto* inf = app.add_subcommand("infer", "run the trained interpreter on a program");
  inf->add_option("file", file)->required();
  inf->add_option("--params", params, "checkpoint")->required();
  inf->add_option("--emit-proposal", emit, "write the mean-field proposal here");

  auto* ev = app.add_subcommand("eval", "compare predictions with references");
  std::string dir;
  ev->add_option("--params", params)->required();
  ev->add_option("--programs", dir)->required();
  ev->add_option("--caches", caches, "defaults to the program directory");
  ev->add_option("--out", out)->required();

  auto* ess = app.add_subcommand("ess", "importance-sampling ESS of a cache");
  ess->add_option("file", file)->required();

  auto* bench = app.add_subcommand("bench", "ESS per second of is_pred, is_prior and hmc");
  BenchOpts bo;
  bench->add_option("--params", bo.params)->required();
  bench->add_option("--programs", bo.dir)->required();
  bench->add_option("--samples", bo.samples)->check(CLI::PositiveNumber);
  bench->add_option("--seed", bo.seed);
  bench->add_option("--warmup", bo.warmup);
  bench->add_option("--leapfrog", bo.leapfrog)->check(CLI::PositiveNumber);
  bench->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen(cls, types, count, seed, out, common);
    if (*check) return cmd_check(file);
    if (*density) return cmd_density(file, zcsv);
    if (*sim) return cmd_simulate(file, seed, count);
    if (*ref) return cmd_refsample(file, ro, out, common);
    if (*tr) return cmd_train(to, seed, seeds, out, common);
    if (*inf) return cmd_infer(file, params, emit);
    if (*ev) return cmd_eval(params, dir, caches, out, common);
    if (*ess) return cmd_ess(file);
    if (*bench) return cmd_bench(bo, out, common);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

#include "wbi/meta.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>
#include <thread>

#include "wbi/conjugate.hpp"
#include "wbi/diagnostics.hpp"
#include "wbi/error.hpp"

namespace wbi {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double mean_of(const std::deque<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double median_of(std::vector<double> xs) { return xs.empty() ? 0.0 : quantile(std::move(xs), 0.5); }

}  // namespace

BankDims dims_for(const std::vector<const Program*>& programs) {
  if (programs.empty()) throw Error("no programs to size a bank for");
  BankDims d;
  d.n = programs.front()->latent_count();
  for (const Program* p : programs) {
    if (p->latent_count() != d.n)
      throw ShapeError("programs with different latent counts cannot share a bank");
    d.m = std::max(d.m, p->var_count());
  }
  return d;
}

BankDims dims_for(const TrainingCorpus& corpus) {
  std::vector<const Program*> ps;
  for (const auto& e : corpus.train) ps.push_back(&e.program);
  for (const auto& e : corpus.test) ps.push_back(&e.program);
  return dims_for(ps);
}

std::string to_string(ReferenceMethod m) {
  switch (m) {
    case ReferenceMethod::exact: return "exact";
    case ReferenceMethod::snis: return "snis";
    case ReferenceMethod::hmc_lais: return "hmc";
  }
  return "unknown";
}

ReferenceMethod reference_method_from_string(const std::string& s) {
  if (s == "exact") return ReferenceMethod::exact;
  if (s == "snis") return ReferenceMethod::snis;
  if (s == "hmc" || s == "hmc_lais") return ReferenceMethod::hmc_lais;
  throw Error("unknown reference method '" + s + "'");
}

WeightedSampleSet reference_samples(const Program& prog, const ReferenceConfig& cfg) {
  switch (cfg.method) {
    case ReferenceMethod::exact: {
      auto lg = linear_gaussian(prog);
      if (!lg) throw Error("program is not linear-Gaussian; no exact reference");
      WeightedSampleSet ws;
      Rng rng = derive_rng(cfg.seed, {stage::refsample, 3});
      ws.samples = lg->sample(cfg.samples, rng);
      ws.log_weights.assign(cfg.samples, 0.0);
      ws.log_normaliser = lg->log_normaliser();
      ws.tag = ProposalTag::exact;
      ws.seed = cfg.seed;
      return ws;
    }
    case ReferenceMethod::snis: return snis_prior(prog, cfg.samples, cfg.seed);
    case ReferenceMethod::hmc_lais: {
      HmcConfig h = cfg.hmc;
      h.seed = cfg.seed;
      h.samples = (cfg.samples + h.chains - 1) / h.chains;
      HmcResult res = hmc(prog, h);
      WeightedSampleSet ws;
      ws.samples = res.pooled().topRows(static_cast<Eigen::Index>(cfg.samples));
      ws.log_weights.assign(cfg.samples, 0.0);
      ws.log_normaliser = lais(prog, ws.samples, cfg.lais_samples, cfg.seed).log_normaliser;
      ws.tag = ProposalTag::hmc;
      ws.seed = cfg.seed;
      return ws;
    }
  }
  throw Error("unknown reference method");
}

void set_reference(CorpusEntry& e) {
  if (auto lg = linear_gaussian(e.program)) {
    e.ref_mean = lg->mean();
    e.ref_var = lg->covariance().diagonal();
    e.ref_log_z = lg->log_normaliser();
    return;
  }
  e.cache.moments(e.ref_mean, e.ref_var);
  e.ref_log_z = e.cache.log_normaliser;
}

CorpusEntry make_entry(std::string label, Program prog, const ReferenceConfig& cfg) {
  CorpusEntry e;
  e.label = std::move(label);
  e.cache = reference_samples(prog, cfg);
  e.program = std::move(prog);
  set_reference(e);
  return e;
}

Batch full_batch(const WeightedSampleSet& cache) {
  const auto w = cache.normalised_weights();
  return {ad::weighted_moments(cache.samples,
                               Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()))),
          cache.log_normaliser};
}

Batch sample_batch(const WeightedSampleSet& cache, std::size_t size, Rng& rng) {
  const std::size_t total = cache.size();
  if (size == 0) throw Error("minibatch size must be positive");
  if (size >= total) return full_batch(cache);
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t k = 0; k < size; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, total - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());

  SampleMatrix z(static_cast<Eigen::Index>(size), cache.samples.cols());
  Eigen::VectorXd w(static_cast<Eigen::Index>(size));
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < size; ++k) hi = std::max(hi, cache.log_weights[idx[k]]);
  if (!std::isfinite(hi)) throw NumericError("minibatch has no positive weight");
  for (std::size_t k = 0; k < size; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    z.row(kk) = cache.samples.row(static_cast<Eigen::Index>(idx[k]));
    const double lw = cache.log_weights[idx[k]];
    w(kk) = std::isfinite(lw) ? std::exp(lw - hi) : 0.0;
  }
  w /= w.sum();
  return {ad::weighted_moments(z, w), cache.log_normaliser};
}

ad::Tensor loss(ad::Tape& tape, NetworkBank& bank, const Program& prog, const Batch& batch,
                double lambda, LossParts* parts) {
  TapedInference inf = infer_taped(tape, bank, prog);
  ad::Tensor ce = neg_log_q(inf, batch.moments);
  const double n_hat = std::exp(batch.log_normaliser);
  ad::Tensor gap = ad::add_scalar(ad::scale(ad::exp(inf.log_z), -1.0), n_hat);
  ad::Tensor pen = ad::scale(ad::square(gap), 0.5 * lambda);
  ad::Tensor total = ad::add(ce, pen);
  if (!std::isfinite(total.scalar())) throw NumericError("non-finite training loss");
  if (parts) *parts = {ce.scalar(), pen.scalar()};
  return total;
}

LossParts loss_value(const NetworkBank& bank, const Program& prog, const Batch& batch,
                     double lambda) {
  const InferResult r = infer(bank, prog);
  const auto& m = batch.moments;
  const auto& q = r.posterior;
  double ce = 0.0;
  for (Eigen::Index i = 0; i < q.mean.size(); ++i) {
    const double d = m.mean(i) - q.mean(i);
    ce += m.weight_sum * (kHalfLog2Pi + 0.5 * std::log(q.variance(i))) +
          0.5 * (m.centred_sq(i) + m.weight_sum * d * d) / q.variance(i);
  }
  const double gap = std::exp(batch.log_normaliser) - r.z();
  return {ce, 0.5 * lambda * gap * gap};
}

LossParts grad_step(NetworkBank& bank, ad::Adam& opt, const Program& prog, const Batch& batch,
                    double lambda) {
  opt.zero_grad();
  ad::Tape tape;
  LossParts parts;
  ad::Tensor l = loss(tape, bank, prog, batch, lambda, &parts);
  tape.backward(l);
  opt.step();
  return parts;
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

LossParts mean_loss(const NetworkBank& bank, const std::vector<CorpusEntry>& entries, double lambda,
                    std::size_t threads) {
  if (entries.empty()) return {};
  std::vector<LossParts> parts(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    parts[i] = loss_value(bank, entries[i].program, full_batch(entries[i].cache), lambda);
  });
  LossParts mean;
  for (const auto& p : parts) {
    mean.cross_entropy += p.cross_entropy;
    mean.penalty += p.penalty;
  }
  mean.cross_entropy /= static_cast<double>(parts.size());
  mean.penalty /= static_cast<double>(parts.size());
  return mean;
}

std::string loss_csv(const std::vector<LossRecord>& log) {
  std::ostringstream out;
  out << "epoch,train_loss,test_loss,wall_ms,train_loss_raw,test_loss_raw,train_ce,train_penalty,"
         "test_ce,test_penalty\n";
  for (const auto& r : log)
    out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.test_loss) << ','
        << format_real(r.wall_ms) << ',' << format_real(r.train_loss_raw) << ','
        << format_real(r.test_loss_raw) << ',' << format_real(r.train_parts.cross_entropy) << ','
        << format_real(r.train_parts.penalty) << ',' << format_real(r.test_parts.cross_entropy)
        << ',' << format_real(r.test_parts.penalty) << '\n';
  return out.str();
}

TrainResult train(NetworkBank& bank, const TrainingCorpus& corpus, const TrainConfig& cfg,
                  const std::function<void(std::size_t, const NetworkBank&)>& on_epoch) {
  if (corpus.train.empty()) throw Error("training corpus is empty");
  for (const auto& e : corpus.train) {
    if (e.cache.size() == 0) throw Error("missing reference cache for " + e.label);
    check_compatible(bank, e.program);
  }
  for (const auto& e : corpus.test) check_compatible(bank, e.program);

  ad::Adam opt(bank.parameters(), cfg.adam);
  Rng rng = derive_rng(cfg.seed, {stage::train});
  std::vector<std::optional<Batch>> fixed(corpus.train.size());
  for (std::size_t i = 0; i < corpus.train.size(); ++i)
    if (cfg.minibatch >= corpus.train[i].cache.size()) fixed[i] = full_batch(corpus.train[i].cache);

  std::vector<std::size_t> order(corpus.train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t window = std::max<std::size_t>(1, cfg.smoothing);
  std::deque<double> train_window, test_window;
  TrainResult res;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossParts sum;
    for (std::size_t i : order) {
      const auto& e = corpus.train[i];
      const Batch batch = fixed[i] ? *fixed[i] : sample_batch(e.cache, cfg.minibatch, rng);
      const LossParts p = grad_step(bank, opt, e.program, batch, cfg.lambda);
      sum.cross_entropy += p.cross_entropy;
      sum.penalty += p.penalty;
    }
    const double k = static_cast<double>(order.size());
    const LossParts train_parts{sum.cross_entropy / k, sum.penalty / k};
    train_window.push_back(train_parts.total());
    if (train_window.size() > window) train_window.pop_front();
    const double smoothed = mean_of(train_window);
    res.epochs_run = epoch;

    const bool log_now = cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch == 1);
    if (log_now) {
      LossRecord r;
      r.epoch = epoch;
      r.train_loss = smoothed;
      r.train_loss_raw = train_parts.total();
      r.train_parts = train_parts;
      r.test_parts = mean_loss(bank, corpus.test, cfg.lambda, cfg.threads);
      r.test_loss_raw = r.test_parts.total();
      test_window.push_back(r.test_loss_raw);
      if (test_window.size() > window) test_window.pop_front();
      r.test_loss = mean_of(test_window);
      r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      res.log.push_back(r);
    }
    if (on_epoch) on_epoch(epoch, bank);

    if (cfg.plateau_stop) {
      if (smoothed < best - cfg.plateau_tolerance * std::abs(best)) {
        best = smoothed;
        since_best = 0;
      } else if (++since_best >= cfg.plateau_patience) {
        res.stopped_on_plateau = true;
        break;
      }
    }
  }
  return res;
}

double gaussian_kl(double m1, double v1, double m2, double v2) {
  return 0.5 * (std::log(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0);
}

EvalReport evaluate(const NetworkBank& bank, const std::vector<CorpusEntry>& entries) {
  EvalReport rep;
  std::vector<double> kls, zerr;
  double kl_sum = 0.0, base_sum = 0.0, z_sum = 0.0;
  for (const auto& e : entries) {
    const InferResult r = infer(bank, e.program);
    ProgramReport p;
    p.label = e.label;
    for (Eigen::Index i = 0; i < r.posterior.mean.size(); ++i) {
      const double pm = r.posterior.mean(i), pv = r.posterior.variance(i);
      const double rm = e.ref_mean(i), rv = e.ref_var(i);
      p.pred_mean.push_back(pm);
      p.pred_var.push_back(pv);
      p.ref_mean.push_back(rm);
      p.ref_var.push_back(rv);
      p.kl += gaussian_kl(rm, rv, pm, pv);
      p.baseline_kl += gaussian_kl(rm, rv, 0.0, 1e4);
      p.mean_error_sd.push_back(std::abs(pm - rm) / std::sqrt(rv));
    }
    p.pred_log_z = r.log_z;
    p.ref_log_z = e.ref_log_z;
    p.z_rel_error = std::abs(std::exp(r.log_z - e.ref_log_z) - 1.0);
    kl_sum += p.kl;
    base_sum += p.baseline_kl;
    z_sum += p.z_rel_error;
    kls.push_back(p.kl);
    zerr.push_back(p.z_rel_error);
    rep.programs.push_back(std::move(p));
  }
  if (!entries.empty()) {
    const double k = static_cast<double>(entries.size());
    rep.mean_kl = kl_sum / k;
    rep.mean_baseline_kl = base_sum / k;
    rep.mean_z_rel_error = z_sum / k;
    rep.median_kl = median_of(kls);
    rep.median_z_rel_error = median_of(zerr);
  }
  return rep;
}

}  // namespace wbi

#include "autr/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace autr {

BatchMetrics train_step(ModelParamsT<float>& params, AdamStateT<float>& opt, const Hyper& h,
                        const TrainConfig& cfg, const Batch& batch, int64_t iter,
                        int64_t batch_index) {
  float w = static_cast<float>(anneal_weight(iter, cfg.anneal_end));
  GradsT<float> grads;
  BatchMetrics m = elbo_batch(params, h, cfg.decoder, batch, w, cfg.dropout, &grads);
  if (!std::isfinite(m.loss))
    throw TrainError("non-finite loss at iteration " + std::to_string(iter) + ", batch index " +
                     std::to_string(batch_index) + "; aborting before the update");
  if (cfg.grad_clip > 0) {
    double norm = std::sqrt(grads.sq_norm());
    if (norm > cfg.grad_clip) grads.scale(static_cast<float>(cfg.grad_clip / norm));
  }
  adam_step(params, grads, opt, cfg.lr);
  return m;
}

Checkpoint train(const TrainConfig& cfg, const std::vector<EncodedSentence>& corpus,
                 const std::string& vocab_path, int vocab_size, const std::string& out_dir,
                 const TrainHooks& hooks) {
  cfg.validate();
  Hyper h = cfg.hyper(vocab_size);
  ModelParamsT<float> params = init_params<float>(h, cfg.seed);
  AdamStateT<float> opt = AdamStateT<float>::like(params);
  BatchStream stream(corpus, cfg.batch_size, cfg.seed);

  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir + "/metrics.csv");
  if (!csv) throw TrainError("cannot write metrics file in " + out_dir);
  csv << "iter,loss,recon,kl,anneal,wallclock_s\n";

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.vocab_size = vocab_size;
  ckpt.vocab_path = vocab_path;

  auto t0 = std::chrono::steady_clock::now();
  auto wallclock = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto save = [&](int64_t iter, const std::string& name) {
    ckpt.iteration = iter;
    ckpt.params = params;
    ckpt.opt = opt;
    save_checkpoint(out_dir + "/" + name, ckpt);
  };

  int64_t batches_per_epoch = stream.batches_per_epoch();
  for (int64_t iter = 0; iter < cfg.iterations; ++iter) {
    Batch batch = stream.next();
    double w = anneal_weight(iter, cfg.anneal_end);
    BatchMetrics m = train_step(params, opt, h, cfg, batch, iter, iter % batches_per_epoch);
    int64_t shown = iter + 1;
    if (shown % cfg.log_every == 0 || shown == cfg.iterations) {
      char row[160];
      std::snprintf(row, sizeof(row), "%lld,%.9g,%.9g,%.9g,%.9g,%.3f\n",
                    static_cast<long long>(shown), m.loss, m.recon, m.kl, w, wallclock());
      csv << row;
      csv.flush();
      if (hooks.on_log) hooks.on_log(shown, m, w);
    }
    if (shown % cfg.ckpt_every == 0 && shown != cfg.iterations)
      save(shown, "checkpoint_" + std::to_string(shown) + ".autr");
  }
  save(cfg.iterations, "model.autr");
  return ckpt;
}

double perplexity(double total_elbo, int64_t total_tokens) {
  if (total_tokens <= 0) throw ContractError("perplexity: no tokens");
  return std::exp(-total_elbo / static_cast<double>(total_tokens));
}

EvalResult evaluate(const ModelParamsT<float>& params, const Hyper& h, DecoderKind kind,
                    const std::vector<EncodedSentence>& corpus, int n_samples, uint64_t seed) {
  if (n_samples < 1) throw ContractError("evaluate: n_samples must be >= 1");
  EvalResult r;
  r.sentences = static_cast<int64_t>(corpus.size());
  if (corpus.empty()) return r;

  int n = static_cast<int>(corpus.size());
  std::vector<double> elbo(static_cast<size_t>(n)), kl(static_cast<size_t>(n));
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (int i = 0; i < n; ++i) {
    Rng rng(seed, "eval-eps", static_cast<uint64_t>(i));
    double acc = 0, kl_i = 0;
    for (int s = 0; s < n_samples; ++s) {
      auto eps = draw_eps<float>(h.Dz, rng);
      TapeT<float> t;
      BoundParams<float> P = bind_params(t, params, false);
      auto nodes =
          elbo_sentence_graph(t, P, h, kind, corpus[static_cast<size_t>(i)], eps, 1.0f);
      acc += -static_cast<double>(t.val(nodes.loss).data[0]);
      kl_i = t.val(nodes.kl).data[0];
    }
    elbo[static_cast<size_t>(i)] = acc / n_samples;
    kl[static_cast<size_t>(i)] = kl_i;
  }

  double total_elbo = 0;
  int64_t total_tokens = 0;
  for (int i = 0; i < n; ++i) {
    total_elbo += elbo[static_cast<size_t>(i)];
    r.kl += kl[static_cast<size_t>(i)];
    total_tokens += corpus[static_cast<size_t>(i)].true_length;
  }
  r.elbo = total_elbo / n;
  r.kl /= n;
  r.ppl = perplexity(total_elbo, total_tokens);
  return r;
}

std::string format_eval_line(const EvalResult& r) {
  char line[160];
  std::snprintf(line, sizeof(line), "elbo=%.4f kl=%.4f ppl=%.4f sentences=%lld", r.elbo, r.kl,
                r.ppl, static_cast<long long>(r.sentences));
  return line;
}

}  // namespace autr

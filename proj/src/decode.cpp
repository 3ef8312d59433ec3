#include "autr/decode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "autr/elbo.hpp"

namespace autr {

namespace {

struct Hyp {
  std::vector<int> ids;
  double lp = 0;
  bool ended = false;
  std::vector<Infer::BaselineState> states;  // one per z sample, baseline only
};

bool ids_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

BeamDecoder::BeamDecoder(const ModelParamsT<float>& params, const Hyper& h, DecoderKind kind)
    : infer_(params, h), kind_(kind) {}

BeamDecoder::ZContext BeamDecoder::make_ctx(const Tensor& z) const {
  ZContext ctx;
  ctx.z = z;
  if (kind_ == DecoderKind::Autr) ctx.canvas = infer_.run_writer(z, infer_.hyper().T).canvas;
  return ctx;
}

DecodeResult BeamDecoder::decode(const Tensor& z, int K) const {
  std::vector<int> forced(static_cast<size_t>(infer_.hyper().L), -1);
  return run_beam({make_ctx(z)}, forced, K, false);
}

DecodeResult BeamDecoder::decode_canvas(const Tensor& z, const Tensor& canvas, int K) const {
  if (kind_ != DecoderKind::Autr)
    throw ContractError("decode_canvas: only the canvas decoder has canvases");
  ZContext ctx;
  ctx.z = z;
  ctx.canvas = canvas;
  std::vector<int> forced(static_cast<size_t>(infer_.hyper().L), -1);
  return run_beam({ctx}, forced, K, false);
}

DecodeResult BeamDecoder::decode_constrained(const std::vector<Tensor>& zs,
                                             const std::vector<int>& forced, int K) const {
  std::vector<ZContext> ctxs;
  ctxs.reserve(zs.size());
  for (const auto& z : zs) ctxs.push_back(make_ctx(z));
  return run_beam(ctxs, forced, K, true);
}

double BeamDecoder::score(const Tensor& z, const EncodedSentence& x) const {
  return infer_.sentence_logprob(kind_, z, x);
}

double BeamDecoder::score_mean(const std::vector<Tensor>& zs, const EncodedSentence& x) const {
  double acc = 0;
  for (const auto& z : zs) acc += score(z, x);
  return acc / static_cast<double>(zs.size());
}

DecodeResult BeamDecoder::run_beam(const std::vector<ZContext>& zs, const std::vector<int>& forced,
                                   int K, bool constrained) const {
  const Hyper& h = infer_.hyper();
  if (K < 1) throw ContractError("beam: K must be >= 1");
  if (zs.empty()) throw ContractError("beam: need at least one z");
  if (static_cast<int>(forced.size()) != h.L)
    throw ContractError("beam: forced mask must have length L");
  int S = static_cast<int>(zs.size());

  std::vector<Hyp> beam(1);
  if (kind_ == DecoderKind::Baseline)
    beam[0].states.assign(static_cast<size_t>(S), infer_.baseline_init());

  struct Cand {
    int parent;
    int token;
    double lp;
  };
  std::vector<Cand> cands;
  std::vector<double> mean_logp(static_cast<size_t>(h.V));
  std::vector<std::vector<Infer::BaselineState>> stepped;

  for (int l = 1; l <= h.L; ++l) {
    cands.clear();
    stepped.assign(beam.size(), {});
    for (size_t hi = 0; hi < beam.size(); ++hi) {
      Hyp& hyp = beam[hi];
      std::fill(mean_logp.begin(), mean_logp.end(), 0.0);
      if (kind_ == DecoderKind::Autr) {
        for (int s = 0; s < S; ++s) {
          auto logp = infer_.emission_logprobs(zs[static_cast<size_t>(s)].z,
                                               zs[static_cast<size_t>(s)].canvas, l, hyp.ids);
          for (int v = 0; v < h.V; ++v) mean_logp[static_cast<size_t>(v)] += logp[static_cast<size_t>(v)];
        }
      } else {
        stepped[hi] = hyp.states;
        int prev = l == 1 ? -1 : hyp.ids[static_cast<size_t>(l - 2)];
        for (int s = 0; s < S; ++s) {
          auto logp = infer_.baseline_step(zs[static_cast<size_t>(s)].z, prev,
                                           stepped[hi][static_cast<size_t>(s)]);
          for (int v = 0; v < h.V; ++v) mean_logp[static_cast<size_t>(v)] += logp[static_cast<size_t>(v)];
        }
      }
      for (auto& v : mean_logp) v /= S;

      auto push = [&](int token) {
        cands.push_back({static_cast<int>(hi), token, hyp.lp + mean_logp[static_cast<size_t>(token)]});
      };
      if (forced[static_cast<size_t>(l - 1)] >= 0) {
        push(forced[static_cast<size_t>(l - 1)]);
      } else if (constrained) {
        // free slots of an imputation hold words; EOS/PAD come from the
        // observed positions
        for (int v = Vocabulary::kUnk; v < h.V; ++v) push(v);
      } else if (hyp.ended) {
        push(Vocabulary::kPad);
      } else if (l == h.L) {
        push(Vocabulary::kEos);  // last slot of an open hypothesis must close it
      } else {
        for (int v = Vocabulary::kEos; v < h.V; ++v) push(v);
      }
    }

    auto better = [&](const Cand& a, const Cand& b) {
      if (a.lp != b.lp) return a.lp > b.lp;
      const auto& pa = beam[static_cast<size_t>(a.parent)].ids;
      const auto& pb = beam[static_cast<size_t>(b.parent)].ids;
      if (pa != pb) return ids_less(pa, pb);
      return a.token < b.token;
    };
    size_t keep = std::min(static_cast<size_t>(K), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep), cands.end(), better);
    cands.resize(keep);

    std::vector<Hyp> next;
    next.reserve(keep);
    for (const Cand& c : cands) {
      Hyp child;
      const Hyp& parent = beam[static_cast<size_t>(c.parent)];
      child.ids = parent.ids;
      child.ids.push_back(c.token);
      child.lp = c.lp;
      child.ended = parent.ended || c.token == Vocabulary::kEos;
      if (kind_ == DecoderKind::Baseline) child.states = stepped[static_cast<size_t>(c.parent)];
      next.push_back(std::move(child));
    }
    beam = std::move(next);
  }

  const Hyp& best = beam.front();  // beam stays sorted by the candidate order
  DecodeResult out;
  out.sentence.ids = best.ids;
  out.sentence.true_length = h.L;
  for (int l = 0; l < h.L; ++l)
    if (best.ids[static_cast<size_t>(l)] == Vocabulary::kEos) {
      out.sentence.true_length = l + 1;
      break;
    }
  out.logprob = best.lp;
  return out;
}

std::vector<EncodedSentence> sample_prior(const BeamDecoder& dec, int n, int K, uint64_t seed) {
  const Hyper& h = dec.infer().hyper();
  std::vector<EncodedSentence> out;
  out.reserve(static_cast<size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    Rng rng(seed, "prior", static_cast<uint64_t>(i));
    Tensor z = draw_eps<float>(h.Dz, rng);  // prior N(0, I)
    out.push_back(dec.decode(z, K).sentence);
  }
  return out;
}

EncodedSentence reconstruct(const BeamDecoder& dec, const EncodedSentence& x, ReconstructMode mode,
                            int K, uint64_t seed) {
  auto post = dec.infer().encode(x);
  Tensor z = post.mu;
  if (mode == ReconstructMode::PosteriorSample) {
    Rng rng(seed, "recon-eps");
    z = Infer::sample_z(post, draw_eps<float>(dec.infer().hyper().Dz, rng));
  }
  return dec.decode(z, K).sentence;
}

namespace {

std::vector<Tensor> posterior_samples(const BeamDecoder& dec, const EncodedSentence& x, int s,
                                      Rng& rng) {
  auto post = dec.infer().encode(x);
  std::vector<Tensor> zs;
  zs.reserve(static_cast<size_t>(s));
  for (int i = 0; i < s; ++i)
    zs.push_back(Infer::sample_z(post, draw_eps<float>(dec.infer().hyper().Dz, rng)));
  return zs;
}

}  // namespace

ImputeResult impute(const BeamDecoder& dec, const ImputationTask& task, int K) {
  const Hyper& h = dec.infer().hyper();
  if (static_cast<int>(task.missing.size()) != h.L)
    throw ContractError("impute: missing mask must have length L");
  if (task.samples < 1 || task.max_iters < 1 || task.restarts < 1)
    throw ContractError("impute: samples, max_iters and restarts must be >= 1");

  int n_missing = 0;
  for (uint8_t m : task.missing) n_missing += m ? 1 : 0;
  if (n_missing == 0) {
    Rng rng(task.seed, "impute-e", 0);
    auto zs = posterior_samples(dec, task.observed, task.samples, rng);
    ImputeResult r;
    r.completed = task.observed;
    r.bound = dec.score_mean(zs, r.completed);
    return r;
  }

  std::vector<int> forced(static_cast<size_t>(h.L));
  for (int l = 0; l < h.L; ++l)
    forced[static_cast<size_t>(l)] =
        task.missing[static_cast<size_t>(l)] ? -1 : task.observed.ids[static_cast<size_t>(l)];
  int content = h.V - Vocabulary::kNumReserved;
  if (content < 1) throw ContractError("impute: vocabulary has no content tokens");

  ImputeResult best;
  bool have_best = false;
  for (int restart = 0; restart < task.restarts; ++restart) {
    Rng init_rng(task.seed, "impute-init", static_cast<uint64_t>(restart));
    EncodedSentence cur = task.observed;
    for (int l = 0; l < h.L; ++l)
      if (task.missing[static_cast<size_t>(l)])
        cur.ids[static_cast<size_t>(l)] =
            Vocabulary::kNumReserved + static_cast<int>(init_rng.below(static_cast<uint64_t>(content)));

    ImputeResult r;
    r.completed = cur;
    Rng e_rng(task.seed, "impute-e", static_cast<uint64_t>(restart));
    for (int it = 0; it < task.max_iters; ++it) {
      auto zs = posterior_samples(dec, r.completed, task.samples, e_rng);
      double incumbent = dec.score_mean(zs, r.completed);
      DecodeResult proposal = dec.decode_constrained(zs, forced, K);
      r.m_step_bounds.emplace_back(incumbent, std::max(incumbent, proposal.logprob));
      if (proposal.logprob > incumbent && !(proposal.sentence == r.completed)) {
        r.completed = proposal.sentence;
        r.bound = proposal.logprob;
      } else {
        r.bound = incumbent;
        break;  // completion unchanged (or no improvement): converged
      }
    }
    if (!have_best || r.bound > best.bound) {
      best = r;
      have_best = true;
    }
  }
  return best;
}

std::vector<std::pair<double, EncodedSentence>> interpolate(const BeamDecoder& dec,
                                                            const Tensor& z1, const Tensor& z2,
                                                            const std::vector<double>& alphas,
                                                            int K) {
  if (!z1.same_shape(z2)) throw ShapeError("interpolate: z shapes differ");
  std::vector<std::pair<double, EncodedSentence>> out;
  for (double alpha : alphas) {
    if (alpha < 0 || alpha > 1) throw ContractError("interpolate: alpha must be in [0,1]");
    Tensor z = Tensor::zeros(z1.shape);
    for (size_t i = 0; i < z.data.size(); ++i)
      z.data[i] = static_cast<float>(alpha) * z1.data[i] +
                  (1.0f - static_cast<float>(alpha)) * z2.data[i];
    out.emplace_back(alpha, dec.decode(z, K).sentence);
  }
  return out;
}

EncodedSentence nearest_sentence(const BeamDecoder& dec, const EncodedSentence& query,
                                 const std::vector<EncodedSentence>& pool, int exclude_index) {
  if (pool.empty() || (pool.size() == 1 && exclude_index == 0))
    throw ContractError("nearest_sentence: empty pool (excluding the query)");
  Tensor z = dec.infer().encode(query).mu;

  Tensor canvas;
  if (dec.kind() == DecoderKind::Autr)
    canvas = dec.infer().run_writer(z, dec.infer().hyper().T).canvas;

  int best = -1;
  double best_score = 0;
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
    if (i == exclude_index) continue;
    const EncodedSentence& x = pool[static_cast<size_t>(i)];
    double s = dec.kind() == DecoderKind::Autr
                   ? static_cast<double>(dec.infer().autr_logprob(z, canvas, x))
                   : static_cast<double>(dec.infer().baseline_logprob(z, x));
    if (best < 0 || s > best_score ||
        (s == best_score && ids_less(x.ids, pool[static_cast<size_t>(best)].ids))) {
      best = i;
      best_score = s;
    }
  }
  return pool[static_cast<size_t>(best)];
}

std::vector<TraceRow> export_trace(const BeamDecoder& dec, const Tensor& z, int K) {
  if (dec.kind() != DecoderKind::Autr)
    throw ContractError("export_trace: traces exist only for the canvas decoder");
  const Hyper& h = dec.infer().hyper();
  auto run = dec.infer().run_writer(z, h.T, /*trace=*/true);
  std::vector<TraceRow> rows;
  rows.reserve(static_cast<size_t>(h.T));
  for (int t = 0; t < h.T; ++t) {
    TraceRow row;
    row.t = t + 1;
    row.sentence = dec.decode_canvas(z, run.step_canvases[static_cast<size_t>(t)], K).sentence;
    row.cum.assign(run.step_cums[static_cast<size_t>(t)].data.begin(),
                   run.step_cums[static_cast<size_t>(t)].data.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_trace_tsv(const std::string& path, const std::vector<TraceRow>& rows,
                     const Vocabulary& vocab) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write trace file: " + path);
  for (const auto& row : rows) {
    os << row.t << '\t' << decode_str(row.sentence, vocab) << '\t';
    char buf[32];
    for (size_t i = 0; i < row.cum.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(row.cum[i]));
      os << (i ? "," : "") << buf;
    }
    os << '\n';
  }
}

void write_heatmap_pgm(const std::string& path, const std::vector<TraceRow>& rows) {
  if (rows.empty()) throw ContractError("heatmap: empty trace");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write heatmap file: " + path);
  int width = static_cast<int>(rows.front().cum.size());
  int height = static_cast<int>(rows.size());
  os << "P5\n" << width << " " << height << "\n255\n";
  for (const auto& row : rows)
    for (float c : row.cum) {
      float clipped = std::min(1.0f, std::max(0.0f, c));
      unsigned char px = static_cast<unsigned char>(std::lround(255.0f * clipped));
      os.write(reinterpret_cast<const char*>(&px), 1);
    }
}

}  // namespace autr

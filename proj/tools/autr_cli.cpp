// Command-line front end: vocabulary building, training, evaluation,
// generation, reconstruction, imputation, interpolation, nearest-sentence
// search, writer traces and the synthetic corpus generator.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "autr/checkpoint.hpp"
#include "autr/decode.hpp"
#include "autr/train.hpp"

namespace {

using namespace autr;

void apply_thread_cap() {
  if (const char* env = std::getenv("AUTR_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) kernels::set_max_threads(n);
  }
}

Vocabulary vocab_for_checkpoint(const Checkpoint& ckpt, const std::string& override_path) {
  return Vocabulary::load(override_path.empty() ? ckpt.vocab_path : override_path);
}

struct LoadedModel {
  Checkpoint ckpt;
  Vocabulary vocab;
  LoadedModel(const std::string& ckpt_path, const std::string& vocab_path)
      : ckpt(load_checkpoint(ckpt_path)), vocab(vocab_for_checkpoint(ckpt, vocab_path)) {}
  BeamDecoder decoder() const { return {ckpt.params, ckpt.hyper(), ckpt.config.decoder}; }
};

void emit_lines(const std::vector<std::string>& lines, const std::string& out_path) {
  for (const auto& l : lines) std::cout << l << "\n";
  if (!out_path.empty()) write_corpus(out_path, lines);
}

int run(int argc, char** argv) {
  CLI::App app{"AUTR: latent-variable sentence writer with a canvas attention decoder"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out;
  int synth_n = 32, synth_vocab = 50, synth_maxlen = 10;
  uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "corpus file to write")->required();
  synth->add_option("--n", synth_n, "number of sentences")->required();
  synth->add_option("--vocab-size", synth_vocab, "distinct word forms available");
  synth->add_option("--max-len", synth_maxlen, "sentence length cap incl. <eos>");
  synth->add_option("--seed", synth_seed, "grammar seed");
  synth->callback([&] {
    write_corpus(synth_out, synth_corpus(synth_seed, synth_n, synth_vocab, synth_maxlen));
    std::cout << "wrote " << synth_n << " sentences to " << synth_out << "\n";
  });

  // ---- vocab ----
  auto* vocab = app.add_subcommand("vocab", "build a vocabulary from a corpus");
  std::string vocab_corpus, vocab_out;
  int vocab_max = fullscale::kVocabSize;
  vocab->add_option("--corpus", vocab_corpus, "corpus file")->required();
  vocab->add_option("--out", vocab_out, "vocabulary TSV to write")->required();
  vocab->add_option("--max-size", vocab_max, "vocabulary size cap incl. reserved");
  vocab->callback([&] {
    auto v = Vocabulary::build(read_corpus(vocab_corpus), vocab_max);
    v.save(vocab_out);
    std::cout << "wrote vocabulary of " << v.size() << " tokens to " << vocab_out << "\n";
  });

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string train_config, train_out, train_corpus, train_vocab;
  std::optional<uint64_t> train_seed;
  train_cmd->add_option("--config", train_config, "config file (key = value lines)")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--corpus", train_corpus, "corpus file (overrides config)");
  train_cmd->add_option("--vocab", train_vocab, "vocabulary TSV (overrides config)");
  train_cmd->add_option("--seed", train_seed, "seed (overrides config)");
  train_cmd->callback([&] {
    TrainConfig cfg = parse_config_file(train_config);
    if (!train_corpus.empty()) cfg.corpus = train_corpus;
    if (!train_vocab.empty()) cfg.vocab = train_vocab;
    if (train_seed) cfg.seed = *train_seed;
    cfg.validate();
    if (cfg.corpus.empty())
      throw ConfigError("no corpus given (config key `corpus` or flag --corpus)");

    auto lines = read_corpus(cfg.corpus);
    std::filesystem::create_directories(train_out);
    std::string vocab_path = cfg.vocab;
    Vocabulary v = [&] {
      if (!vocab_path.empty()) return Vocabulary::load(vocab_path);
      auto built = Vocabulary::build(lines, cfg.vocab_max);
      vocab_path = train_out + "/vocab.tsv";
      built.save(vocab_path);
      return built;
    }();

    auto [encoded, skipped] = encode_corpus(lines, v, cfg.L);
    if (encoded.empty()) throw DataError("no sentence fits the length cap L=" + std::to_string(cfg.L));
    if (skipped)
      std::cout << "skipped " << skipped << " sentences longer than L-1=" << cfg.L - 1 << " tokens\n";

    Hyper h = cfg.hyper(v.size());
    auto probe = init_params<float>(h, cfg.seed);
    std::cout << "decoder=" << to_string(cfg.decoder) << " V=" << v.size()
              << " sentences=" << encoded.size() << "\n";
    std::cout << "params(autr)=" << param_count(probe, DecoderKind::Autr, h)
              << " params(baseline)=" << param_count(probe, DecoderKind::Baseline, h) << "\n";

    TrainHooks hooks;
    hooks.on_log = [](int64_t iter, const BatchMetrics& m, double anneal) {
      std::cout << "iter " << iter << " loss " << m.loss << " recon " << m.recon << " kl " << m.kl
                << " anneal " << anneal << "\n";
    };
    train(cfg, encoded, vocab_path, v.size(), train_out, hooks);
    std::cout << "wrote " << train_out << "/model.autr and " << train_out << "/metrics.csv\n";
  });

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "evaluate ELBO / KL / perplexity on a corpus");
  std::string eval_ckpt, eval_corpus, eval_vocab;
  int eval_samples = 0;
  uint64_t eval_seed = 1;
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "corpus file")->required();
  eval_cmd->add_option("--vocab", eval_vocab, "vocabulary TSV override");
  eval_cmd->add_option("--samples", eval_samples, "z samples per sentence");
  eval_cmd->add_option("--seed", eval_seed, "seed");
  eval_cmd->callback([&] {
    LoadedModel m(eval_ckpt, eval_vocab);
    auto [encoded, skipped] = encode_corpus(read_corpus(eval_corpus), m.vocab, m.ckpt.config.L);
    if (skipped) std::cout << "skipped " << skipped << " over-long sentences\n";
    int n = eval_samples > 0 ? eval_samples : m.ckpt.config.eval_samples;
    auto r = evaluate(m.ckpt.params, m.ckpt.hyper(), m.ckpt.config.decoder, encoded, n, eval_seed);
    std::cout << format_eval_line(r) << "\n";
  });

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "decode sentences from prior samples");
  std::string gen_ckpt, gen_vocab, gen_out;
  int gen_n = 4, gen_beam = fullscale::kBeamSize;
  uint64_t gen_seed = 1;
  gen->add_option("--ckpt", gen_ckpt, "checkpoint file")->required();
  gen->add_option("--n", gen_n, "number of sentences")->required();
  gen->add_option("--beam", gen_beam, "beam width");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--vocab", gen_vocab, "vocabulary TSV override");
  gen->add_option("--out", gen_out, "also write sentences to this file");
  gen->callback([&] {
    LoadedModel m(gen_ckpt, gen_vocab);
    BeamDecoder dec = m.decoder();
    std::vector<std::string> lines;
    for (const auto& s : sample_prior(dec, gen_n, gen_beam, gen_seed))
      lines.push_back(decode_str(s, m.vocab));
    emit_lines(lines, gen_out);
  });

  // ---- reconstruct ----
  auto* rec = app.add_subcommand("reconstruct", "encode then decode sentences");
  std::string rec_ckpt, rec_vocab, rec_input, rec_out, rec_mode = "mean";
  int rec_beam = fullscale::kBeamSize;
  uint64_t rec_seed = 1;
  rec->add_option("--ckpt", rec_ckpt, "checkpoint file")->required();
  rec->add_option("--input", rec_input, "sentences to reconstruct")->required();
  rec->add_option("--mode", rec_mode, "mean | sample")->check(CLI::IsMember({"mean", "sample"}));
  rec->add_option("--beam", rec_beam, "beam width");
  rec->add_option("--seed", rec_seed, "seed (sample mode)");
  rec->add_option("--vocab", rec_vocab, "vocabulary TSV override");
  rec->add_option("--out", rec_out, "also write reconstructions to this file");
  rec->callback([&] {
    LoadedModel m(rec_ckpt, rec_vocab);
    BeamDecoder dec = m.decoder();
    auto [encoded, skipped] = encode_corpus(read_corpus(rec_input), m.vocab, m.ckpt.config.L);
    if (skipped) std::cout << "skipped " << skipped << " over-long sentences\n";
    ReconstructMode mode =
        rec_mode == "mean" ? ReconstructMode::PosteriorMean : ReconstructMode::PosteriorSample;
    std::vector<std::string> lines;
    for (const auto& x : encoded)
      lines.push_back(decode_str(reconstruct(dec, x, mode, rec_beam, rec_seed), m.vocab));
    emit_lines(lines, rec_out);
  });

  // ---- impute ----
  auto* imp = app.add_subcommand("impute", "fill masked words in sentences");
  std::string imp_ckpt, imp_vocab, imp_input, imp_out, imp_mask = "__";
  int imp_beam = 8, imp_restarts = 10, imp_samples = 5, imp_iters = 20;
  uint64_t imp_seed = 1;
  imp->add_option("--ckpt", imp_ckpt, "checkpoint file")->required();
  imp->add_option("--input", imp_input, "masked sentences, mask token at missing words")->required();
  imp->add_option("--mask-token", imp_mask, "token marking a missing word");
  imp->add_option("--beam", imp_beam, "beam width for the M-like step");
  imp->add_option("--restarts", imp_restarts, "random re-initializations");
  imp->add_option("--samples", imp_samples, "z samples per M-like step");
  imp->add_option("--iters", imp_iters, "max EM iterations");
  imp->add_option("--seed", imp_seed, "seed");
  imp->add_option("--vocab", imp_vocab, "vocabulary TSV override");
  imp->add_option("--out", imp_out, "completions file");
  imp->callback([&] {
    LoadedModel m(imp_ckpt, imp_vocab);
    BeamDecoder dec = m.decoder();
    int L = m.ckpt.config.L;
    std::vector<std::string> lines;
    uint64_t row = 0;
    for (const auto& line : read_corpus(imp_input)) {
      auto toks = split_tokens(line);
      if (static_cast<int>(toks.size()) > L - 1) {
        std::cout << "skipped over-long line: " << line << "\n";
        continue;
      }
      ImputationTask task;
      task.missing.assign(static_cast<size_t>(L), 0);
      std::vector<std::string> observed_toks;
      for (size_t i = 0; i < toks.size(); ++i) {
        bool missing = toks[i] == imp_mask;
        task.missing[i] = missing ? 1 : 0;
        observed_toks.push_back(missing ? "<unk>" : toks[i]);
      }
      task.observed = encode(observed_toks, m.vocab, L);
      task.samples = imp_samples;
      task.max_iters = imp_iters;
      task.restarts = imp_restarts;
      task.seed = mix64(imp_seed, row++);
      lines.push_back(decode_str(impute(dec, task, imp_beam).completed, m.vocab));
    }
    emit_lines(lines, imp_out);
  });

  // ---- interpolate ----
  auto* itp = app.add_subcommand("interpolate", "decode convex combinations of two prior samples");
  std::string itp_ckpt, itp_vocab, itp_alphas = "0,0.25,0.5,0.75,1";
  int itp_beam = fullscale::kBeamSize;
  uint64_t itp_seed = 1;
  itp->add_option("--ckpt", itp_ckpt, "checkpoint file")->required();
  itp->add_option("--alphas", itp_alphas, "comma-separated weights in [0,1]");
  itp->add_option("--beam", itp_beam, "beam width");
  itp->add_option("--seed", itp_seed, "seed for the two endpoints");
  itp->add_option("--vocab", itp_vocab, "vocabulary TSV override");
  itp->callback([&] {
    LoadedModel m(itp_ckpt, itp_vocab);
    BeamDecoder dec = m.decoder();
    const Hyper& h = m.ckpt.hyper();
    Rng r1(itp_seed, "interp-z1"), r2(itp_seed, "interp-z2");
    Tensor z1 = draw_eps<float>(h.Dz, r1);
    Tensor z2 = draw_eps<float>(h.Dz, r2);
    std::vector<double> alphas;
    std::istringstream as(itp_alphas);
    std::string tok;
    while (std::getline(as, tok, ',')) alphas.push_back(std::stod(tok));
    for (const auto& [alpha, sent] : interpolate(dec, z1, z2, alphas, itp_beam))
      std::cout << alpha << "\t" << decode_str(sent, m.vocab) << "\n";
  });

  // ---- nearest ----
  auto* near = app.add_subcommand("nearest", "best-matching pool sentence under the query's code");
  std::string near_ckpt, near_vocab, near_input, near_pool, near_out;
  near->add_option("--ckpt", near_ckpt, "checkpoint file")->required();
  near->add_option("--input", near_input, "query sentences")->required();
  near->add_option("--pool", near_pool, "pool corpus to search")->required();
  near->add_option("--vocab", near_vocab, "vocabulary TSV override");
  near->add_option("--out", near_out, "also write matches to this file");
  near->callback([&] {
    LoadedModel m(near_ckpt, near_vocab);
    BeamDecoder dec = m.decoder();
    int L = m.ckpt.config.L;
    auto [pool, skipped] = encode_corpus(read_corpus(near_pool), m.vocab, L);
    if (skipped) std::cout << "skipped " << skipped << " over-long pool sentences\n";
    bool self_pool = near_input == near_pool;
    auto [queries, qskip] = encode_corpus(read_corpus(near_input), m.vocab, L);
    if (qskip) std::cout << "skipped " << qskip << " over-long queries\n";
    std::vector<std::string> lines;
    for (size_t i = 0; i < queries.size(); ++i) {
      int exclude = self_pool ? static_cast<int>(i) : -1;
      lines.push_back(decode_str(nearest_sentence(dec, queries[i], pool, exclude), m.vocab));
    }
    emit_lines(lines, near_out);
  });

  // ---- trace ----
  auto* trace = app.add_subcommand("trace", "export the writer's per-step canvas decodes");
  std::string trace_ckpt, trace_vocab, trace_out, trace_heatmap;
  int trace_beam = fullscale::kBeamSize;
  uint64_t trace_seed = 1;
  trace->add_option("--ckpt", trace_ckpt, "checkpoint file")->required();
  trace->add_option("--out", trace_out, "trace TSV to write")->required();
  trace->add_option("--heatmap", trace_heatmap, "cumulative-attention graymap (PGM)");
  trace->add_option("--beam", trace_beam, "beam width");
  trace->add_option("--seed", trace_seed, "seed for the prior sample");
  trace->add_option("--vocab", trace_vocab, "vocabulary TSV override");
  trace->callback([&] {
    LoadedModel m(trace_ckpt, trace_vocab);
    BeamDecoder dec = m.decoder();
    Rng rng(trace_seed, "trace-z");
    Tensor z = draw_eps<float>(m.ckpt.hyper().Dz, rng);
    auto rows = export_trace(dec, z, trace_beam);
    write_trace_tsv(trace_out, rows, m.vocab);
    if (!trace_heatmap.empty()) write_heatmap_pgm(trace_heatmap, rows);
    std::cout << "wrote " << rows.size() << " trace rows to " << trace_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

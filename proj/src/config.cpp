#include "autr/config.hpp"

#include <fstream>
#include <sstream>

namespace autr {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean for " + key + ": " + v);
}

}  // namespace

void TrainConfig::validate() const {
  if (L < 2 || E < 1 || T < 1 || H < 1 || Dz < 1 || R < 1)
    throw ConfigError("config: model dimensions must be positive (and L >= 2)");
  if (vocab_max < 4) throw ConfigError("config: vocab_max must be >= 4");
  if (lr <= 0) throw ConfigError("config: lr must be positive");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (iterations < 1) throw ConfigError("config: iterations must be >= 1");
  if (anneal_end < 0) throw ConfigError("config: anneal_end must be >= 0");
  if (anneal_end > iterations)
    throw ConfigError("config: anneal_end " + std::to_string(anneal_end) +
                      " exceeds iterations " + std::to_string(iterations));
  if (dropout < 0 || dropout > 1) throw ConfigError("config: dropout must be in [0,1]");
  if (eval_samples < 1) throw ConfigError("config: eval_samples must be >= 1");
  if (grad_clip < 0) throw ConfigError("config: grad_clip must be >= 0");
  if (log_every < 1 || ckpt_every < 1)
    throw ConfigError("config: log_every and ckpt_every must be >= 1");
}

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "decoder") cfg.decoder = decoder_from_string(val);
      else if (key == "L") cfg.L = std::stoi(val);
      else if (key == "E") cfg.E = std::stoi(val);
      else if (key == "T") cfg.T = std::stoi(val);
      else if (key == "H") cfg.H = std::stoi(val);
      else if (key == "Dz") cfg.Dz = std::stoi(val);
      else if (key == "R") cfg.R = std::stoi(val);
      else if (key == "vocab_max") cfg.vocab_max = std::stoi(val);
      else if (key == "share_embeddings") cfg.share_embeddings = parse_bool(val, key);
      else if (key == "lr") cfg.lr = std::stod(val);
      else if (key == "batch_size") cfg.batch_size = std::stoi(val);
      else if (key == "iterations") cfg.iterations = std::stoll(val);
      else if (key == "anneal_end") cfg.anneal_end = std::stoll(val);
      else if (key == "dropout") cfg.dropout = std::stod(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "eval_samples") cfg.eval_samples = std::stoi(val);
      else if (key == "grad_clip") cfg.grad_clip = std::stod(val);
      else if (key == "log_every") cfg.log_every = std::stoll(val);
      else if (key == "ckpt_every") cfg.ckpt_every = std::stoll(val);
      else if (key == "corpus") cfg.corpus = val;
      else if (key == "vocab") cfg.vocab = val;
      else throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key " + key);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad value for " + key + ": " + val);
    }
  }
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os.precision(17);  // doubles must round-trip exactly through checkpoints
  os << "decoder = " << to_string(cfg.decoder) << '\n';
  os << "L = " << cfg.L << '\n';
  os << "E = " << cfg.E << '\n';
  os << "T = " << cfg.T << '\n';
  os << "H = " << cfg.H << '\n';
  os << "Dz = " << cfg.Dz << '\n';
  os << "R = " << cfg.R << '\n';
  os << "vocab_max = " << cfg.vocab_max << '\n';
  os << "share_embeddings = " << (cfg.share_embeddings ? "true" : "false") << '\n';
  os << "lr = " << cfg.lr << '\n';
  os << "batch_size = " << cfg.batch_size << '\n';
  os << "iterations = " << cfg.iterations << '\n';
  os << "anneal_end = " << cfg.anneal_end << '\n';
  os << "dropout = " << cfg.dropout << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "eval_samples = " << cfg.eval_samples << '\n';
  os << "grad_clip = " << cfg.grad_clip << '\n';
  os << "log_every = " << cfg.log_every << '\n';
  os << "ckpt_every = " << cfg.ckpt_every << '\n';
  if (!cfg.corpus.empty()) os << "corpus = " << cfg.corpus << '\n';
  if (!cfg.vocab.empty()) os << "vocab = " << cfg.vocab << '\n';
  return os.str();
}

}  // namespace autr

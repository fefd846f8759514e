#include "ffgt/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ffgt/errors.hpp"

namespace ffgt {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  if (std::strtod(buf, nullptr) == v) return buf;
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("bad numeric value for '" + key + "': " + v);
  return x;
}

long long parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("bad integer value for '" + key + "': " + v);
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("bad integer value for '" + key + "': " + v);
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean value for '" + key + "': " + v);
}

std::vector<std::string> split_tokens(const std::string& v) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream in(v);
  while (in >> tok) {
    while (!tok.empty() && tok.back() == ',') tok.pop_back();
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

CliConfig parse_config_text(const std::string& text) {
  CliConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = line.substr(1, line.size() - 2);
      if (section != "sbm" && section != "model" && section != "train")
        throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("key '" + key + "' appears before any section header");

    auto& model = cfg.train.model;
    if (section == "sbm") {
      if (key == "p") cfg.sbm.p = parse_double(key, value);
      else if (key == "q") cfg.sbm.q = parse_double(key, value);
      else if (key == "p_p") cfg.sbm.p_p = parse_double(key, value);
      else if (key == "q_p") cfg.sbm.q_p = parse_double(key, value);
      else if (key == "n_communities") cfg.sbm.n_communities = static_cast<int>(parse_int(key, value));
      else if (key == "community_size_range") {
        const auto toks = split_tokens(value);
        if (toks.size() != 2)
          throw ConfigError("community_size_range expects two integers (lo hi)");
        cfg.sbm.community_size_lo = static_cast<int>(parse_int(key, toks[0]));
        cfg.sbm.community_size_hi = static_cast<int>(parse_int(key, toks[1]));
      } else if (key == "pattern_size") cfg.sbm.pattern_size = static_cast<int>(parse_int(key, value));
      else if (key == "n_patterns") cfg.sbm.n_patterns = static_cast<int>(parse_int(key, value));
      else if (key == "feature_vocab") cfg.sbm.feature_vocab = static_cast<int>(parse_int(key, value));
      else if (key == "seed") cfg.sbm.seed = parse_u64(key, value);
      else if (key == "n_train") cfg.n_train = static_cast<int>(parse_int(key, value));
      else if (key == "n_val") cfg.n_val = static_cast<int>(parse_int(key, value));
      else if (key == "n_test") cfg.n_test = static_cast<int>(parse_int(key, value));
      else throw ConfigError("unknown key '" + key + "' in [sbm]");
    } else if (section == "model") {
      if (key == "dim") model.dim = static_cast<int>(parse_int(key, value));
      else if (key == "layers") model.layers = static_cast<int>(parse_int(key, value));
      else if (key == "full_heads") model.full_heads = static_cast<int>(parse_int(key, value));
      else if (key == "focal_heads") model.focal_heads = static_cast<int>(parse_int(key, value));
      else if (key == "fl") model.fl = static_cast<int>(parse_int(key, value));
      else if (key == "mlp_hidden") model.mlp_hidden = static_cast<int>(parse_int(key, value));
      else if (key == "gate_enabled") model.gate_enabled = parse_bool(key, value);
      else if (key == "max_hop_bucket") model.max_hop_bucket = static_cast<int>(parse_int(key, value));
      else if (key == "lap_pe_k") model.lap_pe_k = static_cast<int>(parse_int(key, value));
      else if (key == "virtual_node") model.virtual_node = parse_bool(key, value);
      else throw ConfigError("unknown key '" + key + "' in [model]");
    } else {  // train
      if (key == "lr") cfg.train.lr = parse_double(key, value);
      else if (key == "beta1") cfg.train.beta1 = parse_double(key, value);
      else if (key == "beta2") cfg.train.beta2 = parse_double(key, value);
      else if (key == "adam_eps") cfg.train.adam_eps = parse_double(key, value);
      else if (key == "epochs") cfg.train.epochs = static_cast<int>(parse_int(key, value));
      else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_int(key, value));
      else if (key == "class_weighting") cfg.train.class_weighting = parse_bool(key, value);
      else if (key == "eval_every") cfg.train.eval_every = static_cast<int>(parse_int(key, value));
      else if (key == "seed") cfg.train.seed = parse_u64(key, value);
      else if (key == "fl_list") {
        cfg.fl_list.clear();
        for (const auto& tok : split_tokens(value)) {
          if (tok == "vanilla") cfg.fl_list.push_back(-1);
          else cfg.fl_list.push_back(static_cast<int>(parse_int(key, tok)));
        }
        if (cfg.fl_list.empty()) throw ConfigError("fl_list must be non-empty");
      } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& tok : split_tokens(value)) cfg.seeds.push_back(parse_u64(key, tok));
        if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");
      } else throw ConfigError("unknown key '" + key + "' in [train]");
    }
  }
  // The model embeds node features from the generator's vocabulary.
  cfg.train.model.feature_vocab = cfg.sbm.feature_vocab;
  return cfg;
}

CliConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string CliConfig::echo() const {
  const auto& m = train.model;
  std::string out;
  out += "[sbm]\n";
  out += "p = " + format_double(sbm.p) + "\n";
  out += "q = " + format_double(sbm.q) + "\n";
  out += "p_p = " + format_double(sbm.p_p) + "\n";
  out += "q_p = " + format_double(sbm.q_p) + "\n";
  out += "n_communities = " + std::to_string(sbm.n_communities) + "\n";
  out += "community_size_range = " + std::to_string(sbm.community_size_lo) + " " +
         std::to_string(sbm.community_size_hi) + "\n";
  out += "pattern_size = " + std::to_string(sbm.pattern_size) + "\n";
  out += "n_patterns = " + std::to_string(sbm.n_patterns) + "\n";
  out += "feature_vocab = " + std::to_string(sbm.feature_vocab) + "\n";
  out += "seed = " + std::to_string(sbm.seed) + "\n";
  out += "n_train = " + std::to_string(n_train) + "\n";
  out += "n_val = " + std::to_string(n_val) + "\n";
  out += "n_test = " + std::to_string(n_test) + "\n";
  out += "\n[model]\n";
  out += "dim = " + std::to_string(m.dim) + "\n";
  out += "layers = " + std::to_string(m.layers) + "\n";
  out += "full_heads = " + std::to_string(m.full_heads) + "\n";
  out += "focal_heads = " + std::to_string(m.focal_heads) + "\n";
  out += "fl = " + std::to_string(m.fl) + "\n";
  out += "mlp_hidden = " + std::to_string(m.mlp_hidden) + "\n";
  out += std::string("gate_enabled = ") + (m.gate_enabled ? "true" : "false") + "\n";
  out += "max_hop_bucket = " + std::to_string(m.max_hop_bucket) + "\n";
  out += "lap_pe_k = " + std::to_string(m.lap_pe_k) + "\n";
  out += std::string("virtual_node = ") + (m.virtual_node ? "true" : "false") + "\n";
  out += "\n[train]\n";
  out += "lr = " + format_double(train.lr) + "\n";
  out += "beta1 = " + format_double(train.beta1) + "\n";
  out += "beta2 = " + format_double(train.beta2) + "\n";
  out += "adam_eps = " + format_double(train.adam_eps) + "\n";
  out += "epochs = " + std::to_string(train.epochs) + "\n";
  out += "batch_size = " + std::to_string(train.batch_size) + "\n";
  out += std::string("class_weighting = ") + (train.class_weighting ? "true" : "false") + "\n";
  out += "eval_every = " + std::to_string(train.eval_every) + "\n";
  out += "seed = " + std::to_string(train.seed) + "\n";
  std::string fls;
  for (const int fl : fl_list) fls += (fls.empty() ? "" : " ") + std::string(fl < 0 ? "vanilla" : std::to_string(fl));
  out += "fl_list = " + fls + "\n";
  std::string sds;
  for (const auto s : seeds) sds += (sds.empty() ? "" : " ") + std::to_string(s);
  out += "seeds = " + sds + "\n";
  return out;
}

}  // namespace ffgt

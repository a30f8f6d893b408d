#include "capsnet/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace capsnet {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + line +
                        "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("duplicate key: " + key);
    kv[key] = val;
  }
  return kv;
}

class KvReader {
 public:
  explicit KvReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }
  int integer(const std::string& key, int fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos;
      int v = std::stoi(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": expected integer, got '" + it->second + "'");
    }
  }
  double real(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": expected number, got '" + it->second + "'");
    }
  }
  bool boolean(const std::string& key, bool fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("key " + key + ": expected true/false, got '" + it->second + "'");
  }
  std::vector<int> int_list(const std::string& key, std::vector<int> fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<int> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      try {
        out.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ConfigError("key " + key + ": expected comma-separated integers, got '" +
                          it->second + "'");
      }
    }
    if (out.empty()) throw ConfigError("key " + key + ": empty list");
    return out;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) throw ConfigError("unknown config key: " + k);
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

Activation parse_activation(const std::string& s) {
  if (s == "squash") return Activation::kSquash;
  if (s == "custom") return Activation::kCustom;
  throw ConfigError("activation must be 'squash' or 'custom', got '" + s + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  KvReader kv(parse_kv(text));
  RunConfig rc;
  rc.dataset = kv.str("dataset", "cifar10");
  if (rc.dataset != "cifar10" && rc.dataset != "mnist")
    throw ConfigError("dataset must be 'cifar10' or 'mnist', got '" + rc.dataset + "'");

  ModelConfig& m = rc.model;
  m.num_classes = 10;
  m.input_channels = rc.dataset == "mnist" ? 1 : 3;
  m.input_size = rc.dataset == "mnist" ? 28 : 32;

  rc.augment.crop_size = kv.integer("augment.crop", 0);
  rc.augment.enabled = rc.augment.crop_size > 0;
  if (rc.augment.enabled) {
    if (rc.augment.crop_size > m.input_size)
      throw ConfigError("augment.crop exceeds image size");
    m.input_size = rc.augment.crop_size;  // the network sees cropped images
  }

  const int n_conv = kv.integer("conv.count", 1);
  if (n_conv < 1 || n_conv > 8) throw ConfigError("conv.count must be in [1,8]");
  m.conv_layers.clear();
  for (int i = 1; i <= n_conv; ++i) {
    const std::string p = "conv" + std::to_string(i);
    ConvLayerConfig cl;
    cl.filters = kv.integer(p + ".filters", 256);
    cl.kernel = kv.integer(p + ".kernel", 9);
    cl.stride = kv.integer(p + ".stride", 1);
    m.conv_layers.push_back(cl);
  }

  m.primary.num_capsule_types = kv.integer("primary.types", 32);
  m.primary.capsule_dim = kv.integer("primary.dim", 8);
  m.primary.kernel = kv.integer("primary.kernel", 9);
  m.primary.stride = kv.integer("primary.stride", 2);

  const int n_stack = kv.integer("stack.count", 0);
  if (n_stack < 0 || n_stack > 4) throw ConfigError("stack.count must be in [0,4]");
  m.stacked.clear();
  for (int i = 1; i <= n_stack; ++i) {
    const std::string p = "stack" + std::to_string(i);
    RoutingCapsuleConfig sc;
    sc.num_out_capsules = kv.integer(p + ".capsules", 10);
    sc.out_dim = kv.integer(p + ".dim", 16);
    sc.routing_iterations = kv.integer(p + ".iterations", 3);
    m.stacked.push_back(sc);
  }

  m.nota = kv.boolean("nota", false);
  m.output.out_dim = kv.integer("output.dim", 16);
  m.output.routing_iterations = kv.integer("output.iterations", 3);
  m.output.num_out_capsules = m.num_output_capsules();

  m.activation = parse_activation(kv.str("activation", "squash"));
  m.loss.m_plus = kv.real("loss.m_plus", 0.9);
  m.loss.m_minus = kv.real("loss.m_minus", 0.1);
  m.loss.lambda_down = kv.real("loss.lambda", 0.5);
  m.loss.reconstruction_scale = kv.real("loss.recon_scale", 0.0005);
  if (!(0.0 <= m.loss.m_minus && m.loss.m_minus < m.loss.m_plus && m.loss.m_plus <= 1.0))
    throw ConfigError("margin constants must satisfy 0 <= m_minus < m_plus <= 1");
  if (m.loss.reconstruction_scale < 0) throw ConfigError("loss.recon_scale must be >= 0");

  m.decoder_hidden = kv.int_list("decoder.hidden", {512, 1024});
  m.seed = static_cast<std::uint64_t>(kv.integer("seed", 0));

  rc.batch_size = kv.integer("train.batch", 128);
  rc.learning_rate = kv.real("train.lr", 1e-3);
  rc.epochs = kv.integer("train.epochs", 50);
  rc.train_limit = kv.integer("train.limit", 0);
  rc.val_limit = kv.integer("val.limit", 0);
  if (rc.batch_size < 1) throw ConfigError("train.batch must be >= 1");
  if (rc.epochs < 0) throw ConfigError("train.epochs must be >= 0");

  kv.reject_unknown();
  validate_config(m);
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_model_config(const ModelConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "input.channels=" << cfg.input_channels << "\n";
  os << "input.size=" << cfg.input_size << "\n";
  os << "num_classes=" << cfg.num_classes << "\n";
  os << "conv.count=" << cfg.conv_layers.size() << "\n";
  for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
    const std::string p = "conv" + std::to_string(i + 1);
    os << p << ".filters=" << cfg.conv_layers[i].filters << "\n";
    os << p << ".kernel=" << cfg.conv_layers[i].kernel << "\n";
    os << p << ".stride=" << cfg.conv_layers[i].stride << "\n";
  }
  os << "primary.types=" << cfg.primary.num_capsule_types << "\n";
  os << "primary.dim=" << cfg.primary.capsule_dim << "\n";
  os << "primary.kernel=" << cfg.primary.kernel << "\n";
  os << "primary.stride=" << cfg.primary.stride << "\n";
  os << "stack.count=" << cfg.stacked.size() << "\n";
  for (std::size_t i = 0; i < cfg.stacked.size(); ++i) {
    const std::string p = "stack" + std::to_string(i + 1);
    os << p << ".capsules=" << cfg.stacked[i].num_out_capsules << "\n";
    os << p << ".dim=" << cfg.stacked[i].out_dim << "\n";
    os << p << ".iterations=" << cfg.stacked[i].routing_iterations << "\n";
  }
  os << "output.capsules=" << cfg.output.num_out_capsules << "\n";
  os << "output.dim=" << cfg.output.out_dim << "\n";
  os << "output.iterations=" << cfg.output.routing_iterations << "\n";
  os << "activation=" << activation_name(cfg.activation) << "\n";
  os << "loss.m_plus=" << cfg.loss.m_plus << "\n";
  os << "loss.m_minus=" << cfg.loss.m_minus << "\n";
  os << "loss.lambda=" << cfg.loss.lambda_down << "\n";
  os << "loss.recon_scale=" << cfg.loss.reconstruction_scale << "\n";
  os << "decoder.hidden=";
  for (std::size_t i = 0; i < cfg.decoder_hidden.size(); ++i)
    os << (i ? "," : "") << cfg.decoder_hidden[i];
  os << "\n";
  os << "nota=" << (cfg.nota ? "true" : "false") << "\n";
  os << "seed=" << cfg.seed << "\n";
  return os.str();
}

ModelConfig parse_model_config(const std::string& text) {
  KvReader kv(parse_kv(text));
  ModelConfig m;
  m.input_channels = kv.integer("input.channels", 3);
  m.input_size = kv.integer("input.size", 32);
  m.num_classes = kv.integer("num_classes", 10);
  const int n_conv = kv.integer("conv.count", 1);
  m.conv_layers.clear();
  for (int i = 1; i <= n_conv; ++i) {
    const std::string p = "conv" + std::to_string(i);
    m.conv_layers.push_back({kv.integer(p + ".filters", 256), kv.integer(p + ".kernel", 9),
                             kv.integer(p + ".stride", 1)});
  }
  m.primary.num_capsule_types = kv.integer("primary.types", 32);
  m.primary.capsule_dim = kv.integer("primary.dim", 8);
  m.primary.kernel = kv.integer("primary.kernel", 9);
  m.primary.stride = kv.integer("primary.stride", 2);
  const int n_stack = kv.integer("stack.count", 0);
  m.stacked.clear();
  for (int i = 1; i <= n_stack; ++i) {
    const std::string p = "stack" + std::to_string(i);
    m.stacked.push_back({kv.integer(p + ".capsules", 10), kv.integer(p + ".dim", 16),
                         kv.integer(p + ".iterations", 3)});
  }
  m.output.num_out_capsules = kv.integer("output.capsules", 10);
  m.output.out_dim = kv.integer("output.dim", 16);
  m.output.routing_iterations = kv.integer("output.iterations", 3);
  m.activation = parse_activation(kv.str("activation", "squash"));
  m.loss.m_plus = kv.real("loss.m_plus", 0.9);
  m.loss.m_minus = kv.real("loss.m_minus", 0.1);
  m.loss.lambda_down = kv.real("loss.lambda", 0.5);
  m.loss.reconstruction_scale = kv.real("loss.recon_scale", 0.0005);
  m.decoder_hidden = kv.int_list("decoder.hidden", {512, 1024});
  m.nota = kv.boolean("nota", false);
  m.seed = static_cast<std::uint64_t>(kv.integer("seed", 0));
  kv.reject_unknown();
  return m;
}

}  // namespace capsnet
